#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meter/autodiff.hpp"
#include "meter/matrix.hpp"

namespace meter {

enum class Activation { ReLU, Identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Layer widths plus one activation per layer (widths.size() - 1 layers).
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;

  // ReLU on every layer except the last, which is Identity.
  static MlpSpec relu_hidden(std::vector<std::size_t> widths);
  static MlpSpec uniform(std::vector<std::size_t> widths, Activation act);

  std::size_t layer_count() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  // Throws ContractError unless >= 2 widths, all >= 1, one activation per layer.
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// One dense layer: y = act(x * weight + bias), weight is N_in x N_out.
struct Layer {
  Matrix weight;
  Vector bias;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

// Ordered layers of an MLP; layer n (1-based in the literature) is layers[n-1].
struct ParameterSet {
  std::vector<Layer> layers;

  std::size_t size() const { return layers.size(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool same_shapes(const ParameterSet& other) const;
  // Throws ShapeError unless the layers chain and match the spec widths.
  void check_against(const MlpSpec& spec) const;
  // Mutable views over every weight and bias buffer, in layer order.
  std::vector<std::span<double>> slots();

  static ParameterSet zeros_like(const MlpSpec& spec);

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

// Elementwise a + b; ShapeError on mismatch.
ParameterSet operator+(const ParameterSet& a, const ParameterSet& b);

// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ParameterSet glorot_uniform(const MlpSpec& spec, std::mt19937_64& rng);
Matrix glorot_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

void apply_activation(Activation act, std::span<double> values);

// Plain forward pass for one input vector.
Vector mlp_forward(const ParameterSet& params, const MlpSpec& spec, std::span<const double> input);

// Parameters of one layer recorded on a tape; bias is a 1 x N_out row.
struct TapeLayer {
  ad::Var weight;
  ad::Var bias;
};

// Records params on the tape, as leaves when trainable, else as constants.
std::vector<TapeLayer> record(ad::Tape& tape, const ParameterSet& params, bool trainable);

// Batched forward over a B x input_dim matrix node.
ad::Var mlp_forward(ad::Tape& tape, const std::vector<TapeLayer>& layers, const MlpSpec& spec,
                    ad::Var input);

// Gradients of the recorded leaves, shaped like the parameter set.
ParameterSet collect_grads(const ad::Tape& tape, const std::vector<TapeLayer>& layers);

// Buffers of a gradient set in the same order as ParameterSet::slots().
std::vector<std::span<const double>> grad_slots(const ParameterSet& grads);

// Stacks row vectors into a B x d matrix.
Matrix stack_rows(std::span<const Vector> rows);

}  // namespace meter
