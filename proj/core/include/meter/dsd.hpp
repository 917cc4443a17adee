#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "meter/mlp.hpp"
#include "meter/scd.hpp"

namespace meter {

// Generates the shift of one target layer with N_in inputs and N_out outputs
// from the layer embedding e (length d_e):
//
//   v  = w1 e + b1                      (N_in)
//   dW = v w2 + b2 + offset             (N_in x N_out, rank-1 plus offsets)
//   vb = bias_w1 e + bias_b1            (N_out)
//   db = bias_w2 * vb + bias_b2 + bias_offset
struct ShiftGenerator {
  Layer head;          // shared features -> e, linear
  Matrix w1;           // N_in x d_e
  Vector b1;           // N_in
  Matrix w2;           // 1 x N_out
  Matrix b2;           // N_in x N_out
  Matrix offset;       // N_in x N_out
  Matrix bias_w1;      // N_out x d_e
  Vector bias_b1;      // N_out
  Matrix bias_w2;      // 1 x 1
  Vector bias_b2;      // N_out
  Vector bias_offset;  // N_out

  std::size_t in_dim() const { return w1.rows(); }
  std::size_t out_dim() const { return w2.cols(); }
  friend bool operator==(const ShiftGenerator&, const ShiftGenerator&) = default;
};

// Instance-conditioned hypernetwork: one shared encoder, then one generator
// per autoencoder layer (encoder and decoder alike).
struct HyperNetwork {
  MlpSpec share_spec;
  ParameterSet share;
  std::vector<ShiftGenerator> generators;

  std::size_t embed_dim() const;
  std::size_t layer_count() const { return generators.size(); }
  // Mutable views over every parameter buffer in a fixed order.
  std::vector<std::span<double>> slots();
  std::vector<std::span<const double>> const_slots() const;
  // Same shapes, all zeros.
  HyperNetwork zeros_like() const;
  // Throws ShapeError unless generator n targets layer n of the autoencoder.
  void check_against(const AutoencoderModel& scd) const;

  friend bool operator==(const HyperNetwork&, const HyperNetwork&) = default;
};

// Per-layer weight and bias shifts, shaped like the autoencoder parameters.
struct ShiftBundle {
  ParameterSet deltas;
};

struct DsdOptions {
  std::size_t embed_dim = 16;
  std::size_t share_hidden = 32;
  FitOptions fit;
  // Also update the autoencoder weights while fitting (off: autoencoder frozen).
  bool joint = false;
  std::uint64_t seed = 13;
};

// Output layers (w2, b2, offset, bias_w2, bias_b2, bias_offset) start at zero,
// so a fresh hypernetwork generates zero shifts.
HyperNetwork init_hypernetwork(const AutoencoderModel& scd, const DsdOptions& options,
                               std::mt19937_64& rng);

// Output of the shared encoder.
Vector shared_features(const HyperNetwork& hyper, std::span<const double> x);

// Embedding of target layer `layer` (0-based): head_layer(E_share(x)).
Vector embed(const HyperNetwork& hyper, std::span<const double> x, std::size_t layer);

ShiftBundle generate_shift(const HyperNetwork& hyper, std::span<const double> x);

// Elementwise static + shift.
ParameterSet dynamic_params(const AutoencoderModel& scd, const ShiftBundle& shift);

Vector dynamic_reconstruct(const AutoencoderModel& scd, const HyperNetwork& hyper,
                           std::span<const double> x);
AnomalyScore dynamic_score(const AutoencoderModel& scd, const HyperNetwork& hyper,
                           std::span<const double> x);

// Mean dynamic reconstruction loss over the batch, with gradients w.r.t. the
// hypernetwork (and the autoencoder when scd_grad is given).
double dsd_loss_and_grad(const AutoencoderModel& scd, const HyperNetwork& hyper,
                         std::span<const Vector> batch, HyperNetwork* hyper_grad,
                         ParameterSet* scd_grad = nullptr);

// Minimizes the dynamic reconstruction loss over the hypernetwork parameters.
// The autoencoder is updated only when options.joint is set.
void fit_dsd(AutoencoderModel& scd, HyperNetwork& hyper, std::span<const Vector> data,
             const FitOptions& options, bool joint, std::mt19937_64& rng,
             FitReport* report = nullptr);

HyperNetwork train_dsd(AutoencoderModel& scd, std::span<const Vector> data,
                       const DsdOptions& options, FitReport* report = nullptr);

}  // namespace meter
