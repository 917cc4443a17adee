#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meter/matrix.hpp"

namespace meter {

// One record of the stream. The ground-truth label is for evaluation only:
// every read through label() is counted so tests can prove that training
// and inference never consult it.
class Instance {
 public:
  Instance() = default;
  Instance(Vector features, std::size_t t, std::optional<int> label = std::nullopt)
      : features_(std::move(features)), t_(t), label_(label) {}

  const Vector& features() const { return features_; }
  Vector& features() { return features_; }
  std::size_t t() const { return t_; }
  bool has_label() const { return label_.has_value(); }
  std::optional<int> label() const;

 private:
  Vector features_;
  std::size_t t_ = 0;
  std::optional<int> label_;
};

std::size_t label_read_count();
void reset_label_read_count();

std::vector<Vector> features_of(std::span<const Instance> instances);
// Labels of every instance (0 where absent). Counts as label reads.
std::vector<int> labels_of(std::span<const Instance> instances);

struct CsvSchema {
  // Feature columns to read; empty selects every column except `label_column`.
  std::vector<std::string> feature_columns;
  std::string label_column = "label";
};

// Reads a comma-separated file with a mandatory header. Row order is kept as
// stream order. Throws DataError naming the row and column on bad cells.
std::vector<Instance> load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
std::vector<Instance> parse_csv(std::istream& in, const CsvSchema& schema = {},
                                const std::string& source = "<stream>");

// Writes f0..f{d-1}[,label] with round-trip precision.
void write_csv(const std::filesystem::path& path, std::span<const Instance> instances);

// Overlapping windows: instance t holds series[t .. t + width - 1].
std::vector<Instance> shingle(std::span<const double> series, std::size_t width = 10);

// Per-feature affine map x -> (x - mean) / stddev.
struct Standardizer {
  Vector mean;
  Vector stddev;

  static Standardizer fit(std::span<const Instance> history);
  Vector apply(std::span<const double> x) const;
  std::vector<Instance> apply(std::span<const Instance> instances) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct StandardizedSplit {
  std::vector<Instance> history;
  std::vector<Instance> stream;
  Standardizer transform;
};

// Fits on history only and applies the same map to both parts.
StandardizedSplit standardize(std::span<const Instance> history, std::span<const Instance> stream);

struct HistorySplit {
  std::vector<Instance> history;
  std::vector<Instance> stream;
};

// The first ceil(h_r * N) records form the history.
HistorySplit split_history(std::span<const Instance> data, double history_ratio);

enum class DriftStyle { Abrupt, Gradual, Incremental };

const char* to_string(DriftStyle style);

struct DriftSegment {
  std::size_t generator = 0;
  std::size_t length = 0;
  DriftStyle style = DriftStyle::Abrupt;
  // Steps over which a gradual or incremental drift blends in.
  std::size_t transition = 0;
  double anomaly_rate = 0.0;
  // Constant added to every feature of this segment.
  double offset = 0.0;
};

// Recipe for a synthetic stream of Gaussian-mixture concepts.
struct DriftScript {
  std::size_t dim = 10;
  std::vector<DriftSegment> segments;
  // Replays the whole segment list once more after the last segment.
  bool recurrence = false;
  // Mixture shape shared by every generator.
  std::size_t components = 2;
  std::size_t rank = 3;
  double noise = 0.1;
  double spread = 2.0;
  double anomaly_shift = 4.0;

  // Throws ContractError on empty/invalid segments.
  void validate() const;
  std::size_t total_length() const;
  // Start index of every segment after the first.
  std::vector<std::size_t> onsets() const;

  static DriftScript parse(const std::string& text);
  static DriftScript load(const std::filesystem::path& path);
  std::string to_text() const;
};

std::vector<Instance> generate_drift_stream(const DriftScript& script, std::uint64_t seed);

}  // namespace meter
