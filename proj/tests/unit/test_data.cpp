#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "meter/data.hpp"
#include "meter/engine.hpp"
#include "meter/error.hpp"

using namespace meter;

namespace {

std::vector<Instance> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, {}, "test.csv");
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("csv with and without labels") {
  const auto a = parse("f0,f1,label\n1,2,0\n3,4,1\n5,6,0\n");
  REQUIRE(a.size() == 3);
  CHECK(a[1].features() == Vector{3, 4});
  CHECK(a[1].label() == 1);
  CHECK(a[2].t() == 2);
  const auto b = parse("x,y\n1,2\n3,4\n");
  CHECK(b.size() == 2);
  CHECK_FALSE(b[0].has_label());
}

TEST_CASE("csv errors name row and column") {
  try {
    parse("f0,f1\n1,2\n3,oops\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("f1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse("f0,f1\n1\n"), DataError);
  CHECK_THROWS_AS(parse("f0,label\n1,2\n"), DataError);
  CHECK(parse("\xEF\xBB\xBF" "f0\n1\n").size() == 1);
}

TEST_CASE("csv round trip") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  std::vector<Instance> rows;
  for (std::size_t i = 0; i < 50; ++i) rows.emplace_back(Vector{g(rng), g(rng), g(rng) * 1e-9}, i, static_cast<int>(i % 2));
  const auto path = std::filesystem::temp_directory_path() / "meter_roundtrip.csv";
  write_csv(path, rows);
  const auto back = load_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].label() == rows[i].label());
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(back[i].features()[k] - rows[i].features()[k]) <= 1e-12 * std::abs(rows[i].features()[k]));
  }
  std::filesystem::remove(path);
}

TEST_CASE("shingling") {
  const std::vector<double> s{1, 2, 3, 4};
  const auto w2 = shingle(s, 2);
  REQUIRE(w2.size() == 3);
  CHECK(w2[0].features() == Vector{1, 2});
  CHECK(w2[2].features() == Vector{3, 4});
  CHECK(shingle(s, 1).size() == 4);
  CHECK(shingle(s, 4).size() == 1);
  const std::vector<double> r{5, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8};
  const auto w = shingle(r, 10);
  for (std::size_t t = 0; t + 1 < w.size(); ++t)
    for (std::size_t k = 1; k < 10; ++k) CHECK(w[t].features()[k] == w[t + 1].features()[k - 1]);
}

TEST_CASE("standardize uses history statistics only") {
  std::vector<Instance> hist, stream;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(3.0, 2.0);
  for (std::size_t i = 0; i < 500; ++i) hist.emplace_back(Vector{g(rng), 7.0}, i);
  for (std::size_t i = 0; i < 100; ++i) stream.emplace_back(Vector{g(rng) + 10, 7.0}, 500 + i);
  const auto s = standardize(hist, stream);
  double m = 0, v = 0;
  for (const auto& x : s.history) m += x.features()[0];
  m /= 500;
  for (const auto& x : s.history) v += (x.features()[0] - m) * (x.features()[0] - m);
  CHECK(std::abs(m) < 1e-9);
  CHECK(std::abs(v / 500 - 1.0) < 1e-9);
  for (const auto& x : s.history) CHECK(x.features()[1] == 0.0);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const double want = (stream[i].features()[0] - s.transform.mean[0]) / s.transform.stddev[0];
    CHECK(s.stream[i].features()[0] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("history split keeps order") {
  std::vector<Instance> rows;
  for (std::size_t i = 0; i < 11; ++i) rows.emplace_back(Vector{double(i)}, i);
  const auto s = split_history(rows, 0.2);
  CHECK(s.history.size() == 3);  // ceil(2.2)
  CHECK(s.stream.size() == 8);
  CHECK(s.stream.front().features()[0] == 3.0);
  CHECK(split_history(rows, 0.0).history.empty());
}

TEST_CASE("generator: labels, offsets, determinism") {
  DriftScript one;
  one.segments = {{0, 500, DriftStyle::Abrupt, 0, 0.0, 0.0}};
  for (const auto& r : generate_drift_stream(one, 3)) CHECK(r.label() == 0);

  DriftScript two;
  two.segments = {{0, 4000, DriftStyle::Abrupt, 0, 0.0, 0.0}, {0, 4000, DriftStyle::Abrupt, 0, 0.0, 3.0}};
  const auto rows = generate_drift_stream(two, 5);
  Vector m1(two.dim, 0.0), m2(two.dim, 0.0);
  for (std::size_t i = 0; i < 4000; ++i)
    for (std::size_t k = 0; k < two.dim; ++k) {
      m1[k] += rows[i].features()[k] / 4000;
      m2[k] += rows[4000 + i].features()[k] / 4000;
    }
  // Mixture sampling noise on a mean of 4000 draws with spread 2: ~0.1.
  for (std::size_t k = 0; k < two.dim; ++k) CHECK(std::abs(m2[k] - m1[k] - 3.0) < 0.3);

  const auto again = generate_drift_stream(two, 5);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].features() == again[i].features());
  CHECK(generate_drift_stream(two, 6)[0].features() != rows[0].features());
}

TEST_CASE("generator: anomaly rate and onsets") {
  DriftScript s;
  s.segments = {{0, 5000, DriftStyle::Abrupt, 0, 0.02, 0.0},
                {1, 5000, DriftStyle::Gradual, 500, 0.02, 0.0},
                {2, 5000, DriftStyle::Incremental, 500, 0.02, 0.0}};
  s.recurrence = true;
  CHECK(s.total_length() == 30000);
  CHECK(s.onsets() == std::vector<std::size_t>{5000, 10000, 15000, 20000, 25000});
  const auto rows = generate_drift_stream(s, 1);
  double pos = 0;
  for (const auto& r : rows) pos += *r.label();
  CHECK(pos / rows.size() == doctest::Approx(0.02).epsilon(0.2));
}

TEST_CASE("drift script text round trip and errors") {
  const auto s = DriftScript::parse(
      "dim = 4\n# comment\nspread = 1.5\nsegment = generator:0 length:100 style:abrupt rate:0.05\n"
      "segment = generator:1 length:50 style:gradual:20 offset:1\n");
  CHECK(s.dim == 4);
  CHECK(s.segments.size() == 2);
  CHECK(s.segments[1].style == DriftStyle::Gradual);
  CHECK(s.segments[1].transition == 20);
  CHECK(DriftScript::parse(s.to_text()).to_text() == s.to_text());
  CHECK_THROWS_AS(DriftScript::parse("segment = generator:0 length:abc\n"), ConfigError);
  CHECK_THROWS_AS(DriftScript::parse("nonsense\n"), ConfigError);
}

TEST_CASE("training never reads labels unless injection is on") {
  DriftScript s;
  s.segments = {{0, 600, DriftStyle::Abrupt, 0, 0.05, 0.0}};
  const auto rows = generate_drift_stream(s, 2);
  MeterConfig cfg;
  cfg.scd.fit.epochs = 5;
  cfg.iec.fit.epochs = 5;
  cfg.dsd.fit.epochs = 5;
  reset_label_read_count();
  train(rows, cfg);
  CHECK(label_read_count() == 0);
  cfg.inject_labels = 0.5;
  train(rows, cfg);
  CHECK(label_read_count() > 0);
}

}
