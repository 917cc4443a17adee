#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meter/engine.hpp"

namespace meter {

// P(score_pos > score_neg) + 0.5 P(equal), from one sort with tie groups.
// Throws MetricError unless both classes are present.
double aucroc(std::span<const double> scores, std::span<const int> labels);

// Step-wise average precision over a descending-score sweep; tied scores
// form one operating point. Throws MetricError without positives.
double aucpr(std::span<const double> scores, std::span<const int> labels);

struct OnsetResponse {
  std::size_t onset = 0;
  double mean_u_before = 0.0;
  double mean_u_after = 0.0;
  // Steps from the onset to the first U > mu_e / the first update.
  std::optional<std::size_t> detection_delay;
  std::optional<std::size_t> update_lag;
};

// Compares mean U over `span` steps before and after every onset (span is
// usually 2 * delta_l). Onsets outside the trace are skipped.
std::vector<OnsetResponse> drift_response(std::span<const StreamDecision> trace,
                                          std::span<const std::size_t> onsets, double mu_e,
                                          std::size_t span);

struct ThroughputSample {
  std::size_t instances = 0;
  double seconds = 0.0;
  double rate() const { return seconds > 0.0 ? static_cast<double>(instances) / seconds : 0.0; }
};

// Coefficient of determination of the least-squares line seconds ~ instances.
double linearity_r2(std::span<const ThroughputSample> samples);

// Peak resident set size in kilobytes, or 0 where unavailable.
std::size_t peak_rss_kb();

struct MetricsReport {
  std::optional<double> aucroc;
  std::optional<double> aucpr;
  std::string metric_error;  // why a metric is missing
  std::size_t n_scored = 0;
  std::size_t n_anomalies = 0;
  std::size_t static_routes = 0;
  std::size_t dynamic_routes = 0;
  std::size_t updates = 0;
  double throughput = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// labels may be empty (no ground truth): metrics are then absent.
MetricsReport compute_metrics(std::span<const StreamDecision> trace, std::span<const int> labels,
                              double wall_seconds = 0.0);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

// One JSON object per line:
// {"t":..,"score":..,"u":..,"route":"static"|"dynamic","update":..,"version":..}
std::string trace_line(const StreamDecision& d);
void write_trace(std::ostream& out, std::span<const StreamDecision> trace);
void write_trace(const std::filesystem::path& path, std::span<const StreamDecision> trace);
std::vector<StreamDecision> read_trace(std::istream& in);
std::vector<StreamDecision> read_trace(const std::filesystem::path& path);

// {"step","version","S","mu_e_before","mu_e_after"} per line.
void write_update_log(const std::filesystem::path& path, std::span<const UpdateEvent> events);

// t,score,u for plotting.
void write_trace_csv(const std::filesystem::path& path, std::span<const StreamDecision> trace);

}  // namespace meter

namespace meter {

// Ready-to-stream split: shingled (config.shingle > 0, single-column data),
// split by h_r and standardized on the history when configured.
struct PreparedData {
  std::vector<Instance> history;
  std::vector<Instance> stream;
  std::optional<Standardizer> transform;
  // Drift onsets re-based to stream indices.
  std::vector<std::size_t> onsets;
};

PreparedData prepare(std::span<const Instance> data, const MeterConfig& config,
                     std::span<const std::size_t> onsets = {});

// Stream-time ablation switches over one trained snapshot.
struct Variant {
  const char* name;
  bool use_iec;
  bool use_dsd;
  bool use_ous;
};

// S, S+D, w/o IEC, w/o OUS, full.
std::vector<Variant> ablation_lattice();
MeterConfig with_variant(MeterConfig config, const Variant& variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

using AblationHook = std::function<void(const AblationRow&, const StreamResult&, const PreparedData&)>;

// Trains once per seed (all modules on), then streams every variant.
std::vector<AblationRow> run_ablation(const DriftScript& script, const MeterConfig& config,
                                      std::span<const std::uint64_t> seeds,
                                      const AblationHook& hook = {});

std::string ablation_to_json(std::span<const AblationRow> rows);

}  // namespace meter
