#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "meter/config.hpp"
#include "meter/data.hpp"
#include "meter/ous.hpp"

namespace meter {

enum class Route { Static, Dynamic };

const char* to_string(Route route);

struct StreamDecision {
  std::size_t t = 0;
  AnomalyScore score;
  double uncertainty = 0.0;
  Route route = Route::Static;
  bool update_fired = false;
  // Snapshot version used for the whole step.
  std::uint64_t version = 0;

  friend bool operator==(const StreamDecision&, const StreamDecision&) = default;
};

struct UpdateEvent {
  std::size_t step = 0;
  std::uint64_t version = 0;  // version published by the update
  double window_sum = 0.0;
  double mu_e_before = 0.0;
  double mu_e_after = 0.0;
};

struct TrainReport {
  FitReport scd;
  FitReport iec;
  FitReport dsd;
  IecFitSummary labels;
};

// Two-stage training on the historical split: SCD first, then the pseudo
// labelled IEC and the DSD hypernetwork. Labels are read only when
// config.inject_labels > 0.
Snapshot train(std::span<const Instance> history, const MeterConfig& config,
               TrainReport* report = nullptr);
Snapshot train(std::span<const Vector> history, const MeterConfig& config,
               TrainReport* report = nullptr);

// Streaming inference with routing and window-triggered updates.
class StreamEngine {
 public:
  StreamEngine(std::shared_ptr<const Snapshot> snapshot, const MeterConfig& config);
  ~StreamEngine();
  StreamEngine(const StreamEngine&) = delete;
  StreamEngine& operator=(const StreamEngine&) = delete;

  // Throws ShapeError on a feature dimension mismatch.
  StreamDecision step(std::span<const double> x);
  // Blocks until a pending background update has been published.
  void drain();

  std::shared_ptr<const Snapshot> snapshot() const { return cell_.load(); }
  const WindowState& window() const { return window_; }
  const std::vector<UpdateEvent>& updates() const { return updates_; }
  std::size_t steps() const { return t_; }

 private:
  void adopt(const Snapshot& snap);

  MeterConfig config_;
  FinetuneOptions finetune_;
  SnapshotCell cell_;
  WindowState window_;
  std::uint64_t window_version_ = 0;
  std::unique_ptr<AsyncUpdater> updater_;
  std::vector<UpdateEvent> updates_;
  std::size_t t_ = 0;
};

// Decision for one instance against a fixed snapshot (no window, no update).
StreamDecision score_instance(const Snapshot& snapshot, std::span<const double> x,
                              const MeterConfig& config, std::size_t t = 0);

struct StreamResult {
  std::vector<StreamDecision> decisions;
  std::vector<UpdateEvent> updates;
  std::shared_ptr<const Snapshot> final_snapshot;
};

using DecisionSink = std::function<void(const StreamDecision&)>;

StreamResult run_stream(std::shared_ptr<const Snapshot> snapshot, std::span<const Vector> stream,
                        const MeterConfig& config, const DecisionSink& sink = {});

FinetuneOptions finetune_options(const MeterConfig& config);

}  // namespace meter
