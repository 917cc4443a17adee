#include <cstdlib>

#include "doctest.h"
#include "meter/config.hpp"
#include "meter/error.hpp"

using namespace meter;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const MeterConfig c;
  CHECK(c.ous.delta_l == 64);
  CHECK(c.history_ratio == 0.2);
  CHECK(c.scd.explained_variance == 0.7);
  CHECK(c.scd.fit.decay == 0.96);
  CHECK(c.iec.hidden == 32);
  CHECK_FALSE(c.mu_e.has_value());
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parse dotted keys") {
  const auto c = parse_config("# run\nous.delta_l = 32\nmeter.mu_e = 0.05\nscd.hidden = 8,4\nmeter.use_dsd = false\n");
  CHECK(c.ous.delta_l == 32);
  CHECK(c.mu_e == 0.05);
  CHECK(c.scd.hidden == std::vector<std::size_t>{8, 4});
  CHECK_FALSE(c.use_dsd);
  CHECK_FALSE(parse_config("meter.mu_e = max\n").mu_e.has_value());
}

TEST_CASE("bad input is a config error") {
  CHECK_THROWS_AS(parse_config("no.such.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("ous.delta_l = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("ous.beta = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just text\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/meter.cfg"), ConfigError);
}

TEST_CASE("text form round trips and hashes stably") {
  MeterConfig c;
  c.ous.t_max = 999;
  c.iec.mu_p = 0.15;
  c.ous.mu_o_absolute = 2.5;
  const auto back = parse_config(to_text(c));
  CHECK(to_text(back) == to_text(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(MeterConfig{}) != config_hash(c));
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  for (const auto& k : config_keys()) CHECK(to_text(c).find(k) != std::string::npos);
}

TEST_CASE("environment overrides") {
  setenv("METER_OUS_DELTA_L", "16", 1);
  setenv("METER_METER_SEED", "9", 1);
  MeterConfig c;
  const auto keys = apply_env_overrides(c);
  unsetenv("METER_OUS_DELTA_L");
  unsetenv("METER_METER_SEED");
  CHECK(c.ous.delta_l == 16);
  CHECK(c.seed == 9);
  CHECK(keys.size() == 2);
}

}
