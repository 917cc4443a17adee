#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "meter/dsd.hpp"
#include "meter/iec.hpp"
#include "meter/scd.hpp"

namespace meter {

struct OusOptions {
  std::size_t delta_l = 64;
  std::size_t t_max = 50 * 64;
  // mu_o = mu_o_fraction * delta_l * mu_e unless mu_o_absolute is set.
  double mu_o_fraction = 0.1;
  std::optional<double> mu_o_absolute;
  double beta = 0.9;
  std::size_t finetune_epochs = 50;
};

// Sliding window over (instance, uncertainty). S sums the uncertainties
// above mu_e observed since the last reset; the instances themselves stay
// in the ring across resets and serve as fine-tuning data.
class WindowState {
 public:
  WindowState(std::size_t delta_l, std::size_t t_max, double mu_o, double mu_e);

  // Slides the window, bumps dt and returns the trigger flag:
  // S > mu_o or dt > t_max.
  bool observe(std::span<const double> x, double u);
  bool triggered() const { return sum_ > mu_o_ || dt_ > t_max_; }

  // Clears S and dt after an update.
  void reset();
  // Changing mu_e re-derives the counted contributions of live entries.
  void set_mu_e(double mu_e);
  void set_mu_o(double mu_o) { mu_o_ = mu_o; }

  double sum() const { return sum_; }
  double brute_force_sum() const;
  std::size_t dt() const { return dt_; }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return entries_.size(); }
  std::size_t t_max() const { return t_max_; }
  double mu_e() const { return mu_e_; }
  double mu_o() const { return mu_o_; }

  // Oldest first.
  std::vector<Vector> instances() const;
  std::vector<double> uncertainties() const;

 private:
  struct Entry {
    Vector x;
    double u = 0.0;
    bool live = false;
  };
  double contribution(const Entry& e) const { return e.live && e.u > mu_e_ ? e.u : 0.0; }
  void resync();

  std::vector<Entry> entries_;
  std::size_t head_ = 0;  // next slot to write
  std::size_t size_ = 0;
  std::size_t t_max_;
  double mu_o_;
  double mu_e_;
  double sum_ = 0.0;
  std::size_t dt_ = 0;
  std::size_t since_resync_ = 0;
};

double mu_o_for(const OusOptions& options, double mu_e);

// mu_e' = beta * mu_e + (1 - beta) * max(window). Throws ContractError on an
// empty window.
double update_mu_e(double mu_e, std::span<const double> window_uncertainties, double beta = 0.9);

// Immutable published state: every model needed to score, plus mu_e.
struct Snapshot {
  std::uint64_t version = 1;
  AutoencoderModel scd;
  std::optional<ControllerModel> iec;
  std::optional<HyperNetwork> dsd;
  double mu_e = 0.0;
  double mu_p = 0.1;
  // Reconstruction-error threshold behind the last pseudo labelling.
  double error_threshold = 0.0;

  std::size_t feature_dim() const { return scd.feature_dim(); }
  void validate() const;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct FinetuneOptions {
  std::size_t epochs = 50;
  FitOptions fit;  // epochs field ignored
  double beta = 0.9;
  bool update_iec = true;
  bool update_dsd = true;
  std::uint64_t seed = 0;
};

// Warm-starts every model of `base` on the window data and returns the next
// version. mu_e moves by the EMA rule first; pseudo labels use the new value.
Snapshot update_models(const Snapshot& base, std::span<const Vector> window,
                       std::span<const double> window_uncertainties,
                       const FinetuneOptions& options);

// Single-writer cell. Readers grab a shared_ptr and keep using it for as long
// as they like; the writer swaps the pointer under a short lock.
class SnapshotCell {
 public:
  explicit SnapshotCell(std::shared_ptr<const Snapshot> initial);

  std::shared_ptr<const Snapshot> load() const;
  // Throws ContractError unless next->version > current version.
  void publish(std::shared_ptr<const Snapshot> next);
  std::uint64_t version() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> current_;
};

// One background thread running update_models. A trigger arriving while an
// update is in flight is dropped.
class AsyncUpdater {
 public:
  using Hook = std::function<void(const Snapshot& before, const Snapshot& after)>;

  AsyncUpdater(SnapshotCell& cell, FinetuneOptions options, Hook on_publish = {});
  ~AsyncUpdater();
  AsyncUpdater(const AsyncUpdater&) = delete;
  AsyncUpdater& operator=(const AsyncUpdater&) = delete;

  // Returns false when busy.
  bool submit(std::vector<Vector> window, std::vector<double> uncertainties);
  void wait_idle();
  std::size_t completed() const;
  std::size_t dropped() const;

 private:
  void run();

  SnapshotCell& cell_;
  FinetuneOptions options_;
  Hook on_publish_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<std::pair<std::vector<Vector>, std::vector<double>>> job_;
  bool busy_ = false;
  bool stop_ = false;
  std::size_t completed_ = 0;
  std::size_t dropped_ = 0;
  std::thread worker_;
};

}  // namespace meter
