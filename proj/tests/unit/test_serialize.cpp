#include <filesystem>
#include <random>

#include "doctest.h"
#include "meter/engine.hpp"
#include "meter/error.hpp"
#include "meter/serialize.hpp"
#include "oracles.hpp"

using namespace meter;

TEST_SUITE("serialize") {

TEST_CASE("snapshot round trip is exact") {
  std::mt19937_64 rng(1);
  MeterConfig cfg;
  cfg.scd.fit.epochs = 10;
  cfg.iec.fit.epochs = 10;
  cfg.dsd.fit.epochs = 5;
  const Snapshot s = train(oracle::random_batch(200, 5, rng), cfg);
  const auto back = snapshot_from_json(to_json(s));
  CHECK(back == s);
  const auto path = std::filesystem::temp_directory_path() / "meter_snapshot.json";
  save_snapshot(path, s);
  CHECK(load_snapshot(path) == s);
  std::filesystem::remove(path);

  Snapshot bare = s;
  bare.iec.reset();
  bare.dsd.reset();
  CHECK(snapshot_from_json(to_json(bare)) == bare);
}

TEST_CASE("standardizer round trip") {
  const Standardizer t{{1.0 / 3.0, -2.5}, {0.1, 7.0}};
  CHECK(standardizer_from_json(to_json(t)) == t);
}

TEST_CASE("format tags and malformed documents") {
  std::mt19937_64 rng(2);
  const auto ae = init_autoencoder(4, 2, {}, rng);
  CHECK(autoencoder_from_json(to_json(ae)) == ae);
  CHECK_THROWS_AS(controller_from_json(to_json(ae)), DataError);
  CHECK_THROWS_AS(snapshot_from_json("{not json"), DataError);
  std::string doc = to_json(ae);
  doc.replace(doc.find("\"format_version\":1"), 18, "\"format_version\":9");
  CHECK_THROWS_AS(autoencoder_from_json(doc), DataError);
  CHECK_THROWS_AS(load_snapshot("/nonexistent/s.json"), DataError);
}

}
