// meter: train / stream / ablate / bench / generate / grid front end.
//
// Exit codes: 0 ok, 2 usage or config error, 3 data error, 4 dimension
// mismatch, 1 anything else.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "meter/meter.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

#ifndef METER_VERSION
#define METER_VERSION "unknown"
#endif

struct Common {
  std::string config_path;
  std::vector<std::string> sets;  // key=value
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override one key, e.g. --set ous.delta_l=32");
  cmd->add_option("--seed", c.seed, "run seed (meter.seed)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

// base < --config < METER_* env < --set < --seed
meter::MeterConfig resolve_config(const Common& c, meter::MeterConfig base = {}) {
  meter::MeterConfig cfg = base;
  if (!c.config_path.empty()) cfg = meter::load_config(c.config_path, cfg);
  meter::apply_env_overrides(cfg);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw meter::ConfigError("--set expects key=value, got '" + kv + "'");
    meter::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

meter::DriftScript load_script(const std::string& path) {
  try {
    return meter::DriftScript::load(path);
  } catch (const meter::ContractError& e) {
    throw meter::ConfigError(std::string("script: ") + e.what());
  }
}

ojson file_identity(const std::string& path) {
  return {{"kind", "file"}, {"path", path}, {"fnv1a64", meter::hex64(meter::fnv1a64(meter::read_file(path)))}};
}

ojson script_identity(const std::string& path, const meter::DriftScript& s) {
  return {{"kind", "script"}, {"path", path}, {"fnv1a64", meter::hex64(meter::fnv1a64(s.to_text()))}};
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw meter::DataError("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

// Written before any model output.
void write_manifest(const fs::path& dir, const std::string& command, const meter::MeterConfig& cfg,
                    const ojson& dataset, const std::vector<std::string>& outputs) {
  ojson m;
  m["command"] = command;
  m["config_hash"] = meter::hex64(meter::config_hash(cfg));
  m["seed"] = cfg.seed;
  m["dataset"] = dataset;
  m["code_version"] = METER_VERSION;
  ojson outs = ojson::array();
  for (const auto& o : outputs) outs.push_back((dir / o).string());
  m["outputs"] = outs;
  meter::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<meter::Instance> shingled(std::vector<meter::Instance> rows, const meter::MeterConfig& cfg) {
  if (cfg.shingle == 0) return rows;
  meter::PreparedData p = meter::prepare(rows, [&] {
    auto c = cfg;
    c.history_ratio = 0.0;
    c.standardize = false;
    return c;
  }());
  return p.stream;
}

// Labels only when the data carries any.
std::vector<int> labels_if_any(const std::vector<meter::Instance>& rows) {
  const bool any = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.has_label(); });
  return any ? meter::labels_of(rows) : std::vector<int>{};
}

// ---- generate ----

struct GenerateArgs {
  Common c;
  std::string script;
};

int cmd_generate(const GenerateArgs& a) {
  const meter::MeterConfig cfg = resolve_config(a.c);
  const meter::DriftScript script = load_script(a.script);
  const fs::path dir = prepare_out(a.c.out);
  write_manifest(dir, "generate", cfg, script_identity(a.script, script), {"stream.csv", "onsets.json"});
  const auto rows = meter::generate_drift_stream(script, cfg.seed);
  meter::write_csv(dir / "stream.csv", rows);
  meter::write_file(dir / "onsets.json", ojson(script.onsets()).dump() + "\n");
  std::cout << rows.size() << " rows -> " << (dir / "stream.csv").string() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  Common c;
  std::string data;
  std::string script;
};

int cmd_train(const TrainArgs& a) {
  const meter::MeterConfig cfg = resolve_config(a.c);
  std::vector<meter::Instance> rows;
  ojson identity;
  if (!a.data.empty()) {
    identity = file_identity(a.data);
    rows = meter::load_csv(a.data);
  } else {
    const auto script = load_script(a.script);
    identity = script_identity(a.script, script);
    rows = meter::generate_drift_stream(script, cfg.seed);
  }
  const fs::path dir = prepare_out(a.c.out);
  std::vector<std::string> outputs{"config.txt", "snapshot.json"};
  if (cfg.standardize) outputs.push_back("transform.json");
  write_manifest(dir, "train", cfg, identity, outputs);

  const meter::PreparedData prep = meter::prepare(rows, cfg);
  if (prep.history.empty()) throw meter::DataError("history split is empty; more rows or a larger meter.h_r needed");
  const auto start = std::chrono::steady_clock::now();
  meter::TrainReport report;
  const meter::Snapshot snap = meter::train(prep.history, cfg, &report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  meter::write_file(dir / "config.txt", meter::to_text(cfg));
  meter::save_snapshot(dir / "snapshot.json", snap);
  if (prep.transform) meter::save_standardizer(dir / "transform.json", *prep.transform);
  std::cerr << "trained on " << prep.history.size() << " instances in " << secs << " s (scd "
            << report.scd.epoch_losses.size() << " epochs, mu_e " << snap.mu_e << ")\n";
  return 0;
}

// ---- stream ----

struct StreamArgs {
  Common c;
  std::string snapshot;
  std::string transform;
  std::string data;
  std::string script;
  std::string trace_out;
  bool sync = false;
  bool async = false;
  bool all = false;
  bool csv = false;
};

int cmd_stream(const StreamArgs& a) {
  fs::path snap_path(a.snapshot);
  fs::path model_dir = snap_path;
  if (fs::is_directory(snap_path)) {
    snap_path /= "snapshot.json";
  } else {
    model_dir = snap_path.parent_path();
  }
  meter::MeterConfig base;
  if (fs::exists(model_dir / "config.txt")) base = meter::load_config(model_dir / "config.txt");
  meter::MeterConfig cfg = resolve_config(a.c, base);
  if (a.sync) cfg.async = false;
  if (a.async) cfg.async = true;

  std::optional<meter::Standardizer> transform;
  fs::path transform_path = a.transform.empty() ? model_dir / "transform.json" : fs::path(a.transform);
  if (!a.transform.empty() || (cfg.standardize && fs::exists(transform_path))) {
    transform = meter::load_standardizer(transform_path);
  }

  std::vector<meter::Instance> rows;
  ojson identity;
  if (!a.data.empty()) {
    identity = file_identity(a.data);
    rows = meter::load_csv(a.data);
  } else {
    const auto script = load_script(a.script);
    identity = script_identity(a.script, script);
    rows = meter::generate_drift_stream(script, cfg.seed);
  }

  const fs::path dir = prepare_out(a.c.out);
  const std::string trace_name = a.trace_out.empty() ? "trace.jsonl" : a.trace_out;
  std::vector<std::string> outputs{trace_name, "updates.jsonl", "metrics.json"};
  if (a.csv) outputs.push_back("trace.csv");
  write_manifest(dir, "stream", cfg, identity, outputs);

  auto snap = std::make_shared<const meter::Snapshot>(meter::load_snapshot(snap_path));
  rows = shingled(std::move(rows), cfg);
  if (!a.all) rows = meter::split_history(rows, cfg.history_ratio).stream;
  if (transform) rows = transform->apply(rows);
  const std::vector<meter::Vector> xs = meter::features_of(rows);
  const std::vector<int> labels = labels_if_any(rows);

  const auto start = std::chrono::steady_clock::now();
  meter::StreamResult r = meter::run_stream(snap, xs, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path trace_path = fs::path(trace_name).is_absolute() ? fs::path(trace_name) : dir / trace_name;
  meter::write_trace(trace_path, r.decisions);
  meter::write_update_log(dir / "updates.jsonl", r.updates);
  if (a.csv) meter::write_trace_csv(dir / "trace.csv", r.decisions);
  const meter::MetricsReport m = meter::compute_metrics(r.decisions, labels, secs);
  meter::write_file(dir / "metrics.json", meter::metrics_to_json(m) + "\n");

  std::cout << "scored " << m.n_scored << " instances, " << m.updates << " updates";
  if (m.aucroc) std::cout << ", AUCROC " << *m.aucroc;
  if (m.aucpr) std::cout << ", AUCPR " << *m.aucpr;
  if (!m.metric_error.empty()) std::cout << " (" << m.metric_error << ")";
  std::cout << "\n";
  return 0;
}

// ---- ablate ----

struct AblateArgs {
  Common c;
  std::string script;
  std::size_t seeds = 5;
};

int cmd_ablate(const AblateArgs& a) {
  const meter::MeterConfig cfg = resolve_config(a.c);
  const auto script = load_script(a.script);
  const fs::path dir = prepare_out(a.c.out);
  write_manifest(dir, "ablate", cfg, script_identity(a.script, script), {"ablation.json"});
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(cfg.seed + i);
  const auto rows = meter::run_ablation(script, cfg, seeds, [](const meter::AblationRow& row, const auto&, const auto&) {
    std::fprintf(stderr, "seed %llu  %-14s AUCROC %s\n", static_cast<unsigned long long>(row.seed), row.variant.c_str(),
                 row.metrics.aucroc ? std::to_string(*row.metrics.aucroc).c_str() : "n/a");
  });
  const std::string json = meter::ablation_to_json(rows);
  meter::write_file(dir / "ablation.json", json + "\n");
  const ojson parsed = ojson::parse(json);
  for (const auto& s : parsed["summary"]) {
    std::cout << s["variant"].get<std::string>() << "\t" << s["mean_aucroc"].dump() << "\n";
  }
  return 0;
}

// ---- bench ----

struct BenchArgs {
  Common c;
  std::string script;
  std::vector<std::size_t> sizes{2000, 4000, 8000};
};

// Segment lengths rescaled so the script yields exactly n rows.
meter::DriftScript resized(meter::DriftScript s, std::size_t n) {
  s.recurrence = false;
  const double total = static_cast<double>(s.total_length());
  std::size_t used = 0;
  for (std::size_t i = 0; i < s.segments.size(); ++i) {
    auto& seg = s.segments[i];
    if (i + 1 == s.segments.size()) {
      seg.length = n > used ? n - used : 1;
    } else {
      seg.length = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(seg.length) / total * static_cast<double>(n)));
    }
    seg.transition = std::min(seg.transition, seg.length);
    used += seg.length;
  }
  return s;
}

int cmd_bench(BenchArgs a) {
  const meter::MeterConfig cfg = resolve_config(a.c);
  const auto script = load_script(a.script);
  const fs::path dir = prepare_out(a.c.out);
  write_manifest(dir, "bench", cfg, script_identity(a.script, script), {"bench.json"});
  std::sort(a.sizes.begin(), a.sizes.end());

  ojson rows = ojson::array();
  std::vector<meter::ThroughputSample> infer;
  for (std::size_t n : a.sizes) {
    const auto data = meter::generate_drift_stream(resized(script, n), cfg.seed);
    const meter::PreparedData prep = meter::prepare(data, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    auto snap = std::make_shared<const meter::Snapshot>(meter::train(prep.history, cfg));
    const auto t1 = std::chrono::steady_clock::now();
    const auto xs = meter::features_of(prep.stream);
    const auto t2 = std::chrono::steady_clock::now();
    const auto r = meter::run_stream(snap, xs, cfg);
    const auto t3 = std::chrono::steady_clock::now();
    const meter::ThroughputSample train{prep.history.size(), std::chrono::duration<double>(t1 - t0).count()};
    const meter::ThroughputSample inf{prep.stream.size(), std::chrono::duration<double>(t3 - t2).count()};
    infer.push_back(inf);
    rows.push_back({{"size", n},
                    {"history", train.instances},
                    {"stream", inf.instances},
                    {"train_seconds", train.seconds},
                    {"train_throughput", train.rate()},
                    {"inference_seconds", inf.seconds},
                    {"inference_throughput", inf.rate()},
                    {"updates", r.updates.size()},
                    {"peak_rss_kb", meter::peak_rss_kb()}});
    std::cout << n << "\ttrain " << train.rate() << "/s\tinference " << inf.rate() << "/s\n";
  }
  ojson out;
  out["rows"] = rows;
  out["inference_linearity_r2"] = infer.size() >= 2 ? ojson(meter::linearity_r2(infer)) : ojson(nullptr);
  meter::write_file(dir / "bench.json", out.dump(2) + "\n");
  return 0;
}

// ---- grid ----

struct GridArgs {
  Common c;
  std::string data;
  std::string script;
  std::vector<double> mu_p;
  std::vector<double> mu_e{0.001, 0.005, 0.01, 0.1, 0.2, 0.4};
};

// Labelled grid over mu_p x mu_e; picks the best stream AUCROC.
int cmd_grid(GridArgs a) {
  if (a.mu_p.empty())
    for (int i = 1; i <= 10; ++i) a.mu_p.push_back(0.05 * i);
  const meter::MeterConfig cfg = resolve_config(a.c);
  std::vector<meter::Instance> rows;
  ojson identity;
  if (!a.data.empty()) {
    identity = file_identity(a.data);
    rows = meter::load_csv(a.data);
  } else {
    const auto script = load_script(a.script);
    identity = script_identity(a.script, script);
    rows = meter::generate_drift_stream(script, cfg.seed);
  }
  const fs::path dir = prepare_out(a.c.out);
  write_manifest(dir, "grid", cfg, identity, {"grid.json"});
  const meter::PreparedData prep = meter::prepare(rows, cfg);
  const auto xs = meter::features_of(prep.stream);
  const auto labels = labels_if_any(prep.stream);
  if (labels.empty()) throw meter::DataError("grid search needs a label column");

  ojson results = ojson::array();
  ojson best;
  double best_auc = -1.0;
  for (double mp : a.mu_p) {
    for (double me : a.mu_e) {
      meter::MeterConfig c = cfg;
      c.iec.mu_p = mp;
      c.mu_e = me;
      auto snap = std::make_shared<const meter::Snapshot>(meter::train(prep.history, c));
      const auto m = meter::compute_metrics(meter::run_stream(snap, xs, c).decisions, labels);
      ojson row{{"mu_p", mp}, {"mu_e", me}, {"aucroc", m.aucroc ? ojson(*m.aucroc) : ojson(nullptr)},
                {"aucpr", m.aucpr ? ojson(*m.aucpr) : ojson(nullptr)}};
      if (m.aucroc && *m.aucroc > best_auc) {
        best_auc = *m.aucroc;
        best = row;
      }
      results.push_back(row);
      std::cerr << "mu_p " << mp << " mu_e " << me << " AUCROC " << row["aucroc"].dump() << "\n";
    }
  }
  ojson out{{"best", best}, {"results", results}};
  meter::write_file(dir / "grid.json", out.dump(2) + "\n");
  std::cout << "best " << best.dump() << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"METER streaming anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(METER_VERSION));

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic drift stream as CSV");
  add_common(g, gen.c);
  g->add_option("--script", gen.script, "drift script")->required()->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train SCD, IEC and DSD on the history split");
  add_common(t, tr.c);
  auto* t_data = t->add_option("--data", tr.data, "CSV with header")->check(CLI::ExistingFile);
  auto* t_script = t->add_option("--script", tr.script, "drift script instead of a CSV")->check(CLI::ExistingFile);
  t_data->excludes(t_script);

  StreamArgs st;
  auto* s = app.add_subcommand("stream", "score a stream with online updates");
  add_common(s, st.c);
  s->add_option("--snapshot", st.snapshot, "snapshot.json or the train output directory")->required()->check(CLI::ExistingPath);
  s->add_option("--transform", st.transform, "standardizer (default: transform.json next to the snapshot)")
      ->check(CLI::ExistingFile);
  auto* s_data = s->add_option("--data", st.data, "CSV with header")->check(CLI::ExistingFile);
  auto* s_script = s->add_option("--script", st.script, "drift script")->check(CLI::ExistingFile);
  s_data->excludes(s_script);
  s->add_option("--trace-out", st.trace_out, "trace file name (default trace.jsonl under --out)");
  auto* s_sync = s->add_flag("--sync", st.sync, "inline updates (default)");
  s->add_flag("--async", st.async, "background updater")->excludes(s_sync);
  s->add_flag("--all", st.all, "stream every row instead of the post-history part");
  s->add_flag("--csv", st.csv, "also write trace.csv");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "variant lattice S, S+D, w/o IEC, w/o OUS, full");
  add_common(b, ab.c);
  b->add_option("--script", ab.script, "drift script")->required()->check(CLI::ExistingFile);
  b->add_option("--seeds", ab.seeds, "number of seeds, starting at meter.seed")->capture_default_str();

  BenchArgs be;
  auto* bn = app.add_subcommand("bench", "training and inference throughput per size");
  add_common(bn, be.c);
  bn->add_option("--script", be.script, "drift script")->required()->check(CLI::ExistingFile);
  bn->add_option("--sizes", be.sizes, "total instance counts")->delimiter(',');

  GridArgs gr;
  auto* gd = app.add_subcommand("grid", "labelled search over mu_p x mu_e");
  add_common(gd, gr.c);
  auto* g_data = gd->add_option("--data", gr.data, "CSV with header and label column")->check(CLI::ExistingFile);
  auto* g_script = gd->add_option("--script", gr.script, "drift script")->check(CLI::ExistingFile);
  g_data->excludes(g_script);
  gd->add_option("--mu-p", gr.mu_p, "mu_p values (default 0.05..0.5 step 0.05)")->delimiter(',');
  gd->add_option("--mu-e", gr.mu_e, "mu_e values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const auto need_input = [](const char* cmd, const std::string& d, const std::string& sc) {
    if (!d.empty() || !sc.empty()) return true;
    std::cerr << cmd << ": one of --data or --script is required\n";
    return false;
  };
  if (*t && !need_input("train", tr.data, tr.script)) return 2;
  if (*s && !need_input("stream", st.data, st.script)) return 2;
  if (*gd && !need_input("grid", gr.data, gr.script)) return 2;

  if (*g) return cmd_generate(gen);
  if (*t) return cmd_train(tr);
  if (*s) return cmd_stream(st);
  if (*b) return cmd_ablate(ab);
  if (*bn) return cmd_bench(be);
  if (*gd) return cmd_grid(gr);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const meter::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const meter::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const meter::ShapeError& e) {
    std::cerr << "dimension mismatch: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
