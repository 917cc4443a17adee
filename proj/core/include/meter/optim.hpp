#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace meter {

struct AdamOptions {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment gradient descent over a fixed list of parameter buffers.
// The buffer layout is captured on the first step and must not change.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::size_t steps() const { return t_; }

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

// Learning rate after `epoch` completed epochs of exponential decay.
double decayed_learning_rate(double base, double decay, std::size_t epoch);

// Early stopping on a per-epoch loss: stops once `patience` consecutive
// epochs fail to improve the best loss by at least min_delta.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  // Returns true when training should stop.
  bool update(double epoch_loss);
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = 0.0;
  bool seen_ = false;
  std::size_t stale_ = 0;
};

}  // namespace meter
