#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "meter/autodiff.hpp"
#include "meter/dsd.hpp"
#include "meter/iec.hpp"
#include "meter/mlp.hpp"
#include "meter/scd.hpp"

namespace oracle {

using meter::Matrix;
using meter::Vector;

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline std::vector<Vector> random_batch(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_vector(d, rng));
  return out;
}

// Straight-line forward pass, no shared code with mlp_forward.
inline Vector forward(const meter::ParameterSet& p, const meter::MlpSpec& spec, Vector x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l].weight;
    Vector y(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = p.layers[l].bias[j];
      for (std::size_t i = 0; i < w.rows(); ++i) s += x[i] * w(i, j);
      y[j] = spec.activations[l] == meter::Activation::ReLU ? std::max(0.0, s) : s;
    }
    x = std::move(y);
  }
  return x;
}

inline double mse(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// |a - n| / max(|a|, |n|, floor)
inline double rel_err(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Largest relative error between analytic gradients and central differences
// of `loss` over every entry of `params`.
inline double fd_check(const std::vector<std::span<double>>& params,
                       const std::vector<std::vector<double>>& analytic,
                       const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t s = 0; s < params.size(); ++s) {
    for (std::size_t i = 0; i < params[s].size(); ++i) {
      double& p = params[s][i];
      const double keep = p;
      p = keep + h;
      const double up = loss();
      p = keep - h;
      const double down = loss();
      p = keep;
      worst = std::max(worst, rel_err(analytic[s][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

inline std::vector<std::vector<double>> copy_slots(const std::vector<std::span<const double>>& g) {
  std::vector<std::vector<double>> out;
  for (auto s : g) out.emplace_back(s.begin(), s.end());
  return out;
}

// Random symmetric autoencoder of at most 4 layers, widths <= 16.
inline meter::AutoencoderModel random_autoencoder(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(3, 16);
  const std::size_t d = dim(rng);
  const std::size_t z = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(d - 1, 6))(rng);
  std::vector<std::size_t> hidden;
  if (rng() % 2 == 0) hidden.push_back(std::uniform_int_distribution<std::size_t>(z, 16)(rng));
  auto m = meter::init_autoencoder(d, z, hidden, rng);
  // Non-zero biases so every parameter sees gradient.
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& l : m.params.layers)
    for (auto& b : l.bias) b = g(rng);
  return m;
}

// Mean reconstruction loss recorded on a fresh tape.
inline double scd_loss(const meter::AutoencoderModel& m, const std::vector<Vector>& batch,
                       meter::ParameterSet* grad) {
  meter::ad::Tape tape;
  const auto layers = meter::record(tape, m.params, true);
  const auto in = tape.constant(meter::stack_rows(batch));
  const auto out = meter::mlp_forward(tape, layers, m.spec, in);
  const auto loss = meter::reconstruction_loss(tape, in, out);
  if (grad) {
    tape.backward(loss);
    *grad = meter::collect_grads(tape, layers);
  }
  return tape.value(loss)(0, 0);
}

inline double scd_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto m = random_autoencoder(rng);
  const auto batch = random_batch(6, m.feature_dim(), rng);
  meter::ParameterSet g;
  scd_loss(m, batch, &g);
  return fd_check(m.params.slots(), copy_slots(meter::grad_slots(g)),
                  [&] { return scd_loss(m, batch, nullptr); });
}

// Mean evidential (true-class) loss of a controller on a labelled batch.
inline double iec_loss(const meter::ControllerModel& c, const std::vector<Vector>& batch,
                       const std::vector<std::size_t>& labels, meter::ParameterSet* grad) {
  meter::ad::Tape tape;
  const auto layers = meter::record(tape, c.params, true);
  Matrix one_hot(batch.size(), c.classes());
  for (std::size_t i = 0; i < labels.size(); ++i) one_hot(i, labels[i]) = 1.0;
  const auto logits = meter::mlp_forward(tape, layers, c.spec, tape.constant(meter::stack_rows(batch)));
  const auto loss = meter::evidential_loss(tape, logits, tape.constant(one_hot));
  if (grad) {
    tape.backward(loss);
    *grad = meter::collect_grads(tape, layers);
  }
  return tape.value(loss)(0, 0);
}

inline double iec_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
  const std::size_t h = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
  auto c = meter::init_controller(d, h, rng);
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& l : c.params.layers)
    for (auto& b : l.bias) b = g(rng);
  const auto batch = random_batch(6, d, rng);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) labels.push_back(rng() % 2);
  meter::ParameterSet grad;
  iec_loss(c, batch, labels, &grad);
  return fd_check(c.params.slots(), copy_slots(meter::grad_slots(grad)),
                  [&] { return iec_loss(c, batch, labels, nullptr); });
}

// Hypernetwork with every parameter random, so the whole chain
// share -> head -> generator -> shifted autoencoder carries gradient.
inline double dsd_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto scd = random_autoencoder(rng);
  meter::DsdOptions opt;
  opt.embed_dim = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
  opt.share_hidden = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
  auto hyper = meter::init_hypernetwork(scd, opt, rng);
  std::normal_distribution<double> g(0.0, 0.2);
  for (auto s : hyper.slots())
    for (auto& v : s) v = g(rng);
  const auto batch = random_batch(4, scd.feature_dim(), rng);

  meter::HyperNetwork hg;
  meter::ParameterSet sg;
  meter::dsd_loss_and_grad(scd, hyper, batch, &hg, &sg);
  const auto loss = [&] { return meter::dsd_loss_and_grad(scd, hyper, batch, nullptr); };
  const double e_hyper = fd_check(hyper.slots(), copy_slots(hg.const_slots()), loss);
  const double e_scd = fd_check(scd.params.slots(), copy_slots(meter::grad_slots(sg)), loss);
  return std::max(e_hyper, e_scd);
}

// P(pos > neg) + 0.5 P(tie) over all pairs.
inline double brute_aucroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Average precision by enumerating every distinct threshold.
inline double brute_aucpr(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0.0;
  for (int v : y) pos += v;
  double ap = 0.0;
  double last_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0;
    double pred = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        pred += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / pos;
    ap += (recall - last_recall) * tp / pred;
    last_recall = recall;
  }
  return ap;
}

// Random problem of n pairs with heavy ties (scores on a coarse grid).
inline void random_problem(std::size_t n, std::mt19937_64& rng, std::vector<double>& s,
                           std::vector<int>& y) {
  s.resize(n);
  y.resize(n);
  std::uniform_int_distribution<int> grid(0, 20);
  std::bernoulli_distribution pos(0.3);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = grid(rng) / 4.0;
    y[i] = pos(rng) ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace oracle
