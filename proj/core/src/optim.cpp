#include "meter/optim.hpp"

#include <cmath>

#include "meter/error.hpp"

namespace meter {

void Adam::step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: params/grads count mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].size(), 0.0);
      v_[i].assign(params[i].size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter layout changed");
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> p = params[i];
    std::span<const double> g = grads[i];
    if (p.size() != g.size() || p.size() != m_[i].size()) {
      throw ShapeError("adam: buffer size mismatch");
    }
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.epsilon);
    }
  }
}

double decayed_learning_rate(double base, double decay, std::size_t epoch) {
  return base * std::pow(decay, static_cast<double>(epoch));
}

bool EarlyStopping::update(double epoch_loss) {
  if (!seen_ || best_ - epoch_loss >= min_delta_) {
    stale_ = 0;
  } else {
    ++stale_;
  }
  if (!seen_ || epoch_loss < best_) best_ = epoch_loss;
  seen_ = true;
  return stale_ >= patience_;
}

}  // namespace meter
