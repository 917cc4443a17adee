#include "meter/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace meter {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw ContractError("unknown activation '" + name + "'");
}

MlpSpec MlpSpec::relu_hidden(std::vector<std::size_t> widths) {
  MlpSpec spec;
  spec.widths = std::move(widths);
  const std::size_t n = spec.widths.size() < 2 ? 0 : spec.widths.size() - 1;
  spec.activations.assign(n, Activation::ReLU);
  if (n > 0) spec.activations.back() = Activation::Identity;
  spec.validate();
  return spec;
}

MlpSpec MlpSpec::uniform(std::vector<std::size_t> widths, Activation act) {
  MlpSpec spec;
  spec.widths = std::move(widths);
  spec.activations.assign(spec.widths.size() < 2 ? 0 : spec.widths.size() - 1, act);
  spec.validate();
  return spec;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ContractError("mlp spec: need at least two widths");
  for (std::size_t w : widths)
    if (w < 1) throw ContractError("mlp spec: widths must be >= 1");
  if (activations.size() != widths.size() - 1) {
    throw ContractError("mlp spec: need one activation per layer");
  }
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

bool ParameterSet::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

bool ParameterSet::same_shapes(const ParameterSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].weight.same_shape(other.layers[i].weight) ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

void ParameterSet::check_against(const MlpSpec& spec) const {
  if (layers.size() != spec.layer_count()) {
    throw ShapeError("parameter set has " + std::to_string(layers.size()) +
                     " layers, spec expects " + std::to_string(spec.layer_count()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rows() != spec.widths[i] || l.weight.cols() != spec.widths[i + 1] ||
        l.bias.size() != spec.widths[i + 1]) {
      throw ShapeError("layer " + std::to_string(i + 1) + " has shape " +
                       l.weight.shape_string() + ", spec expects " +
                       std::to_string(spec.widths[i]) + "x" + std::to_string(spec.widths[i + 1]));
    }
  }
}

std::vector<std::span<double>> ParameterSet::slots() {
  std::vector<std::span<double>> out;
  out.reserve(2 * layers.size());
  for (auto& l : layers) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  return out;
}

ParameterSet ParameterSet::zeros_like(const MlpSpec& spec) {
  ParameterSet p;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    p.layers.push_back(
        Layer{Matrix(spec.widths[i], spec.widths[i + 1]), Vector(spec.widths[i + 1], 0.0)});
  }
  return p;
}

ParameterSet operator+(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_shapes(b)) throw ShapeError("parameter sets differ in shape");
  ParameterSet out = a;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    out.layers[i].weight += b.layers[i].weight;
    for (std::size_t j = 0; j < out.layers[i].bias.size(); ++j) {
      out.layers[i].bias[j] += b.layers[i].bias[j];
    }
  }
  return out;
}

Matrix glorot_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

ParameterSet glorot_uniform(const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParameterSet p;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    p.layers.push_back(Layer{glorot_matrix(spec.widths[i], spec.widths[i + 1], rng),
                             Vector(spec.widths[i + 1], 0.0)});
  }
  return p;
}

void apply_activation(Activation act, std::span<double> values) {
  if (act == Activation::ReLU) {
    for (double& v : values) v = v > 0.0 ? v : 0.0;
  }
}

Vector mlp_forward(const ParameterSet& params, const MlpSpec& spec,
                   std::span<const double> input) {
  if (input.size() != spec.input_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(input.size()) +
                     " features, expected " + std::to_string(spec.input_dim()));
  }
  if (params.layers.size() != spec.layer_count()) {
    throw ShapeError("mlp_forward: parameter set does not match spec");
  }
  Vector current(input.begin(), input.end());
  Vector next;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    next.assign(l.out_dim(), 0.0);
    affine_into(current, l.weight, l.bias, next);
    apply_activation(spec.activations[i], next);
    std::swap(current, next);
  }
  return current;
}

std::vector<TapeLayer> record(ad::Tape& tape, const ParameterSet& params, bool trainable) {
  std::vector<TapeLayer> out;
  out.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    Matrix bias = Matrix::row(l.bias);
    if (trainable) {
      out.push_back(TapeLayer{tape.leaf(l.weight), tape.leaf(std::move(bias))});
    } else {
      out.push_back(TapeLayer{tape.constant(l.weight), tape.constant(std::move(bias))});
    }
  }
  return out;
}

ad::Var mlp_forward(ad::Tape& tape, const std::vector<TapeLayer>& layers, const MlpSpec& spec,
                    ad::Var input) {
  if (layers.size() != spec.layer_count()) {
    throw ShapeError("mlp_forward: recorded layers do not match spec");
  }
  ad::Var h = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = tape.add_row(tape.matmul(h, layers[i].weight), layers[i].bias);
    if (spec.activations[i] == Activation::ReLU) h = tape.relu(h);
  }
  return h;
}

ParameterSet collect_grads(const ad::Tape& tape, const std::vector<TapeLayer>& layers) {
  ParameterSet g;
  g.layers.reserve(layers.size());
  for (const auto& l : layers) {
    Matrix gb = tape.grad(l.bias);
    g.layers.push_back(Layer{tape.grad(l.weight), std::move(gb.values())});
  }
  return g;
}

std::vector<std::span<const double>> grad_slots(const ParameterSet& grads) {
  std::vector<std::span<const double>> out;
  out.reserve(2 * grads.layers.size());
  for (const auto& l : grads.layers) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  return out;
}

Matrix stack_rows(std::span<const Vector> rows) {
  if (rows.empty()) return {};
  const std::size_t d = rows.front().size();
  Matrix m(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) throw ShapeError("stack_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row_span(r).begin());
  }
  return m;
}

}  // namespace meter
