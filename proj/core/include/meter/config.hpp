#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "meter/dsd.hpp"
#include "meter/iec.hpp"
#include "meter/ous.hpp"
#include "meter/scd.hpp"

namespace meter {

// Every tunable of a run. Text form is flat `dotted.key = value` lines, e.g.
//   ous.delta_l = 64
//   meter.mu_e = max
struct MeterConfig {
  ScdOptions scd;
  IecOptions iec;
  DsdOptions dsd;
  OusOptions ous;

  // nullopt: initialise mu_e to the largest training uncertainty.
  std::optional<double> mu_e;
  double history_ratio = 0.2;
  std::uint64_t seed = 42;
  bool use_iec = true;
  bool use_dsd = true;
  bool use_ous = true;
  // Run the updater on a background thread instead of inline.
  bool async = false;
  // Fraction of true anomalies in the history handed to pseudo labelling
  // (0 = pure pseudo labels). Reads Instance::label.
  double inject_labels = 0.0;

  std::size_t shingle = 0;  // 0: off
  bool standardize = true;

  // Throws ConfigError naming the first offending key.
  void validate() const;
};

// Sets one dotted key from its text value. Throws ConfigError on an unknown
// key or an unparsable value.
void set_config_value(MeterConfig& config, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

MeterConfig parse_config(const std::string& text, MeterConfig base = {});
MeterConfig load_config(const std::filesystem::path& path, MeterConfig base = {});

// METER_OUS_DELTA_L=32 overrides ous.delta_l, and so on for every key.
// Returns the keys that were overridden.
std::vector<std::string> apply_env_overrides(MeterConfig& config, const char* prefix = "METER_");

// Canonical text: every key in a fixed order, round-trip precision.
std::string to_text(const MeterConfig& config);

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t config_hash(const MeterConfig& config);
std::string hex64(std::uint64_t value);

}  // namespace meter
