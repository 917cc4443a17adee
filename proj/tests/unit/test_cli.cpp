#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "meter/serialize.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(METER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return meter::read_file(p); }

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string l;
  while (std::getline(in, l)) ++n;
  return n;
}

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / ("meter_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "one.txt") << "dim = 6\nsegment = generator:0 length:1500 style:abrupt rate:0.03\n";
    // Small epochs keep the CLI tests quick.
    std::ofstream(dir / "fast.cfg") << "scd.epochs = 20\niec.epochs = 10\ndsd.epochs = 5\nous.finetune_epochs = 2\n"
                                       "ous.t_max = 400\n";
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("train") == 2);
  CHECK(run("train --data /nonexistent.csv") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("train, reload, reproduce, stream") {
  Workdir w;
  const std::string common = " --config " + w.p("fast.cfg") + " --seed 3";
  REQUIRE(run("train --script " + w.p("one.txt") + common + " --out " + w.p("a")) == 0);
  REQUIRE(run("train --script " + w.p("one.txt") + common + " --out " + w.p("b")) == 0);
  CHECK(fs::exists(w.dir / "a" / "manifest.json"));
  CHECK_NOTHROW(meter::load_snapshot(w.dir / "a" / "snapshot.json"));
  CHECK(slurp(w.dir / "a" / "snapshot.json") == slurp(w.dir / "b" / "snapshot.json"));
  CHECK(slurp(w.dir / "a" / "transform.json") == slurp(w.dir / "b" / "transform.json"));

  const auto manifest = nlohmann::json::parse(slurp(w.dir / "a" / "manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["dataset"]["kind"] == "script");
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);

  const std::string stream = "stream --snapshot " + w.p("a") + " --script " + w.p("one.txt") + " --sync";
  REQUIRE(run(stream + " --out " + w.p("s1")) == 0);
  REQUIRE(run(stream + " --out " + w.p("s2")) == 0);
  CHECK(slurp(w.dir / "s1" / "trace.jsonl") == slurp(w.dir / "s2" / "trace.jsonl"));
  CHECK(lines(w.dir / "s1" / "trace.jsonl") == 1200);  // 1500 rows minus the 20% history
  const auto metrics = nlohmann::json::parse(slurp(w.dir / "s1" / "metrics.json"));
  CHECK(metrics["n_scored"] == 1200);
  CHECK(metrics["aucroc"].is_number());
  CHECK(lines(w.dir / "s1" / "updates.jsonl") == metrics["updates"].get<std::size_t>());

  REQUIRE(run(stream + " --all --csv --out " + w.p("s3")) == 0);
  CHECK(lines(w.dir / "s3" / "trace.jsonl") == 1500);
  CHECK(lines(w.dir / "s3" / "trace.csv") == 1501);

  // Empty stream: empty trace, flagged metrics.
  std::ofstream(w.dir / "empty.csv") << "f0,f1,f2,f3,f4,f5\n";
  REQUIRE(run("stream --snapshot " + w.p("a") + " --data " + w.p("empty.csv") + " --out " + w.p("e")) == 0);
  CHECK(lines(w.dir / "e" / "trace.jsonl") == 0);
  CHECK(nlohmann::json::parse(slurp(w.dir / "e" / "metrics.json")).contains("metric_error"));

  // Wrong width: exit 4. Bad cell: exit 3.
  std::ofstream(w.dir / "narrow.csv") << "f0,f1\n1,2\n3,4\n";
  CHECK(run("stream --snapshot " + w.p("a") + " --data " + w.p("narrow.csv") + " --all --out " + w.p("n")) == 4);
  std::ofstream(w.dir / "bad.csv") << "f0,f1\n1,x\n";
  CHECK(run("train --data " + w.p("bad.csv") + " --out " + w.p("bad")) == 3);
  CHECK(run("train --script " + w.p("one.txt") + " --set ous.delta_l=zero --out " + w.p("c")) == 2);
}

TEST_CASE("csv data path and env override") {
  Workdir w;
  REQUIRE(run("generate --script " + w.p("one.txt") + " --seed 1 --out " + w.p("g")) == 0);
  CHECK(lines(w.dir / "g" / "stream.csv") == 1501);
  const std::string input = slurp(w.dir / "g" / "stream.csv");
  REQUIRE(run("train --data " + w.p("g/stream.csv") + " --config " + w.p("fast.cfg") + " --out " + w.p("t")) == 0);
  CHECK(slurp(w.dir / "g" / "stream.csv") == input);  // inputs untouched
  const auto m = nlohmann::json::parse(slurp(w.dir / "t" / "manifest.json"));
  CHECK(m["dataset"]["kind"] == "file");

  setenv("METER_OUS_DELTA_L", "32", 1);
  REQUIRE(run("train --data " + w.p("g/stream.csv") + " --config " + w.p("fast.cfg") + " --out " + w.p("t2")) == 0);
  unsetenv("METER_OUS_DELTA_L");
  CHECK(slurp(w.dir / "t2" / "config.txt").find("ous.delta_l = 32") != std::string::npos);
}

TEST_CASE("ablate gives five rows per seed; bench rows sorted with inference faster") {
  Workdir w;
  REQUIRE(run("ablate --script " + w.p("one.txt") + " --config " + w.p("fast.cfg") + " --seeds 1 --out " + w.p("ab")) == 0);
  const auto ab = nlohmann::json::parse(slurp(w.dir / "ab" / "ablation.json"));
  CHECK(ab["runs"].size() == 5);
  CHECK(ab["summary"].size() == 5);
  REQUIRE(run("ablate --script " + w.p("one.txt") + " --config " + w.p("fast.cfg") + " --seeds 1 --out " + w.p("ab2")) == 0);
  CHECK(nlohmann::json::parse(slurp(w.dir / "ab2" / "ablation.json"))["summary"] == ab["summary"]);

  REQUIRE(run("bench --script " + w.p("one.txt") + " --config " + w.p("fast.cfg") + " --sizes 1500 --out " + w.p("b1")) == 0);
  CHECK(nlohmann::json::parse(slurp(w.dir / "b1" / "bench.json"))["rows"].size() == 1);
  REQUIRE(run("bench --script " + w.p("one.txt") + " --config " + w.p("fast.cfg") + " --sizes 3000,1000,2000 --out " +
              w.p("b3")) == 0);
  const auto rows = nlohmann::json::parse(slurp(w.dir / "b3" / "bench.json"))["rows"];
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["size"] == 1000);
  CHECK(rows[2]["size"] == 3000);
  for (const auto& r : rows) CHECK(r["inference_throughput"].get<double>() > r["train_throughput"].get<double>());
}

}
