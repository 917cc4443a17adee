#include "meter/dsd.hpp"

#include <algorithm>
#include <string>

#include "meter/optim.hpp"

namespace meter {

std::size_t HyperNetwork::embed_dim() const {
  return generators.empty() ? 0 : generators.front().head.out_dim();
}

std::vector<std::span<double>> HyperNetwork::slots() {
  std::vector<std::span<double>> out = share.slots();
  for (auto& g : generators) {
    out.emplace_back(g.head.weight.values());
    out.emplace_back(g.head.bias);
    out.emplace_back(g.w1.values());
    out.emplace_back(g.b1);
    out.emplace_back(g.w2.values());
    out.emplace_back(g.b2.values());
    out.emplace_back(g.offset.values());
    out.emplace_back(g.bias_w1.values());
    out.emplace_back(g.bias_b1);
    out.emplace_back(g.bias_w2.values());
    out.emplace_back(g.bias_b2);
    out.emplace_back(g.bias_offset);
  }
  return out;
}

std::vector<std::span<const double>> HyperNetwork::const_slots() const {
  auto mutable_slots = const_cast<HyperNetwork*>(this)->slots();
  return {mutable_slots.begin(), mutable_slots.end()};
}

HyperNetwork HyperNetwork::zeros_like() const {
  HyperNetwork z = *this;
  for (std::span<double> s : z.slots()) std::fill(s.begin(), s.end(), 0.0);
  return z;
}

void HyperNetwork::check_against(const AutoencoderModel& scd) const {
  share.check_against(share_spec);
  if (share_spec.input_dim() != scd.feature_dim()) {
    throw ShapeError("hypernetwork input dim does not match the autoencoder");
  }
  if (generators.size() != scd.params.size()) {
    throw ShapeError("hypernetwork has " + std::to_string(generators.size()) +
                     " generators for " + std::to_string(scd.params.size()) + " layers");
  }
  const std::size_t de = embed_dim();
  for (std::size_t n = 0; n < generators.size(); ++n) {
    const ShiftGenerator& g = generators[n];
    const Layer& target = scd.params.layers[n];
    const std::size_t in = target.in_dim();
    const std::size_t out = target.out_dim();
    const bool ok = g.head.weight.rows() == share_spec.output_dim() && g.head.out_dim() == de &&
                    g.head.bias.size() == de && g.w1.rows() == in && g.w1.cols() == de &&
                    g.b1.size() == in && g.w2.rows() == 1 && g.w2.cols() == out &&
                    g.b2.rows() == in && g.b2.cols() == out && g.offset.same_shape(g.b2) &&
                    g.bias_w1.rows() == out && g.bias_w1.cols() == de && g.bias_b1.size() == out &&
                    g.bias_w2.rows() == 1 && g.bias_w2.cols() == 1 && g.bias_b2.size() == out &&
                    g.bias_offset.size() == out;
    if (!ok) throw ShapeError("generator " + std::to_string(n) + " does not fit its layer");
  }
}

HyperNetwork init_hypernetwork(const AutoencoderModel& scd, const DsdOptions& options,
                               std::mt19937_64& rng) {
  if (options.embed_dim < 1 || options.share_hidden < 1) {
    throw ContractError("hypernetwork: embed_dim and share_hidden must be >= 1");
  }
  HyperNetwork h;
  h.share_spec = MlpSpec::uniform({scd.feature_dim(), options.share_hidden}, Activation::ReLU);
  h.share = glorot_uniform(h.share_spec, rng);
  const std::size_t de = options.embed_dim;
  for (const Layer& target : scd.params.layers) {
    const std::size_t in = target.in_dim();
    const std::size_t out = target.out_dim();
    ShiftGenerator g;
    g.head = Layer{glorot_matrix(options.share_hidden, de, rng), Vector(de, 0.0)};
    g.w1 = glorot_matrix(in, de, rng);
    g.b1 = Vector(in, 0.0);
    g.w2 = Matrix(1, out);
    g.b2 = Matrix(in, out);
    g.offset = Matrix(in, out);
    g.bias_w1 = glorot_matrix(out, de, rng);
    g.bias_b1 = Vector(out, 0.0);
    g.bias_w2 = Matrix(1, 1);
    g.bias_b2 = Vector(out, 0.0);
    g.bias_offset = Vector(out, 0.0);
    h.generators.push_back(std::move(g));
  }
  return h;
}

Vector shared_features(const HyperNetwork& hyper, std::span<const double> x) {
  return mlp_forward(hyper.share, hyper.share_spec, x);
}

namespace {

Vector head_output(const ShiftGenerator& g, const Vector& features) {
  Vector e(g.head.out_dim());
  affine_into(features, g.head.weight, g.head.bias, e);
  return e;
}

// m * e + b for m stored as rows x d_e.
Vector project(const Matrix& m, const Vector& b, const Vector& e) {
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = b[i];
    const auto row = m.row_span(i);
    for (std::size_t k = 0; k < e.size(); ++k) acc += row[k] * e[k];
    out[i] = acc;
  }
  return out;
}

}  // namespace

Vector embed(const HyperNetwork& hyper, std::span<const double> x, std::size_t layer) {
  if (layer >= hyper.generators.size()) {
    throw ContractError("embed: layer index " + std::to_string(layer) + " out of range");
  }
  return head_output(hyper.generators[layer], shared_features(hyper, x));
}

ShiftBundle generate_shift(const HyperNetwork& hyper, std::span<const double> x) {
  const Vector features = shared_features(hyper, x);
  ShiftBundle bundle;
  bundle.deltas.layers.reserve(hyper.generators.size());
  for (const ShiftGenerator& g : hyper.generators) {
    const Vector e = head_output(g, features);
    const Vector v = project(g.w1, g.b1, e);
    const std::size_t in = g.in_dim();
    const std::size_t out = g.out_dim();
    Layer delta{Matrix(in, out), Vector(out)};
    for (std::size_t i = 0; i < in; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        delta.weight(i, j) = v[i] * g.w2(0, j) + g.b2(i, j) + g.offset(i, j);
      }
    }
    const Vector vb = project(g.bias_w1, g.bias_b1, e);
    for (std::size_t j = 0; j < out; ++j) {
      delta.bias[j] = g.bias_w2(0, 0) * vb[j] + g.bias_b2[j] + g.bias_offset[j];
    }
    bundle.deltas.layers.push_back(std::move(delta));
  }
  return bundle;
}

ParameterSet dynamic_params(const AutoencoderModel& scd, const ShiftBundle& shift) {
  return scd.params + shift.deltas;
}

Vector dynamic_reconstruct(const AutoencoderModel& scd, const HyperNetwork& hyper,
                           std::span<const double> x) {
  if (x.size() != scd.feature_dim()) throw ShapeError("dynamic_reconstruct: feature dim mismatch");
  return mlp_forward(dynamic_params(scd, generate_shift(hyper, x)), scd.spec, x);
}

AnomalyScore dynamic_score(const AutoencoderModel& scd, const HyperNetwork& hyper,
                           std::span<const double> x) {
  const Vector y = dynamic_reconstruct(scd, hyper, x);
  return AnomalyScore{mean_squared_error(x, y), ScoreSource::Dynamic};
}

namespace {

struct TapeGenerator {
  TapeLayer head;
  ad::Var w1, b1, w2, b2, offset, bias_w1, bias_b1, bias_w2, bias_b2, bias_offset;
};

struct TapeHyper {
  std::vector<TapeLayer> share;
  std::vector<TapeGenerator> generators;
  // Leaves in HyperNetwork::slots() order.
  std::vector<ad::Var> leaves;
};

TapeHyper record_hyper(ad::Tape& tape, const HyperNetwork& h) {
  TapeHyper t;
  t.share = record(tape, h.share, true);
  for (const auto& l : t.share) {
    t.leaves.push_back(l.weight);
    t.leaves.push_back(l.bias);
  }
  auto leaf = [&](const Matrix& m) {
    ad::Var v = tape.leaf(m);
    t.leaves.push_back(v);
    return v;
  };
  auto row_leaf = [&](const Vector& v) { return leaf(Matrix::row(v)); };
  for (const ShiftGenerator& g : h.generators) {
    TapeGenerator tg;
    tg.head.weight = leaf(g.head.weight);
    tg.head.bias = row_leaf(g.head.bias);
    tg.w1 = leaf(g.w1);
    tg.b1 = row_leaf(g.b1);
    tg.w2 = leaf(g.w2);
    tg.b2 = leaf(g.b2);
    tg.offset = leaf(g.offset);
    tg.bias_w1 = leaf(g.bias_w1);
    tg.bias_b1 = row_leaf(g.bias_b1);
    tg.bias_w2 = leaf(g.bias_w2);
    tg.bias_b2 = row_leaf(g.bias_b2);
    tg.bias_offset = row_leaf(g.bias_offset);
    t.generators.push_back(tg);
  }
  return t;
}

// Per-sample dynamic layers evaluated for a whole batch. For row x_i with
// generated v_i the layer computes
//   x_i (W + v_i w2 + b2 + offset) + b + db_i
// where x_i v_i w2 = (x_i . v_i) w2 keeps the per-sample weights implicit.
ad::Var dynamic_forward(ad::Tape& tape, const AutoencoderModel& scd, const HyperNetwork& hyper,
                        const std::vector<TapeLayer>& base, const TapeHyper& th, ad::Var x) {
  const ad::Var features = mlp_forward(tape, th.share, hyper.share_spec, x);
  ad::Var a = x;
  for (std::size_t n = 0; n < th.generators.size(); ++n) {
    const TapeGenerator& g = th.generators[n];
    const ad::Var e = tape.add_row(tape.matmul(features, g.head.weight), g.head.bias);
    const ad::Var v = tape.add_row(tape.matmul(e, g.w1, true), g.b1);
    const ad::Var vb = tape.add_row(tape.matmul(e, g.bias_w1, true), g.bias_b1);

    ad::Var pre = tape.add_row(tape.matmul(a, base[n].weight), base[n].bias);
    pre = tape.add(pre, tape.matmul(tape.row_dot(a, v), g.w2));
    pre = tape.add(pre, tape.matmul(a, tape.add(g.b2, g.offset)));
    pre = tape.add(pre, tape.scale_by(vb, g.bias_w2));
    pre = tape.add_row(pre, tape.add(g.bias_b2, g.bias_offset));
    a = scd.spec.activations[n] == Activation::ReLU ? tape.relu(pre) : pre;
  }
  return a;
}

void copy_grads(const ad::Tape& tape, const std::vector<ad::Var>& leaves, HyperNetwork& out) {
  auto dst = out.slots();
  if (dst.size() != leaves.size()) throw ShapeError("hypernetwork gradient layout mismatch");
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Matrix g = tape.grad(leaves[i]);
    if (g.size() != dst[i].size()) throw ShapeError("hypernetwork gradient size mismatch");
    std::copy(g.values().begin(), g.values().end(), dst[i].begin());
  }
}

}  // namespace

double dsd_loss_and_grad(const AutoencoderModel& scd, const HyperNetwork& hyper,
                         std::span<const Vector> batch, HyperNetwork* hyper_grad,
                         ParameterSet* scd_grad) {
  if (batch.empty()) throw ContractError("dsd loss: empty batch");
  hyper.check_against(scd);
  ad::Tape tape;
  const auto base = record(tape, scd.params, scd_grad != nullptr);
  const TapeHyper th = record_hyper(tape, hyper);
  const ad::Var x = tape.constant(stack_rows(batch));
  if (tape.value(x).cols() != scd.feature_dim()) throw ShapeError("dsd loss: feature dim mismatch");
  const ad::Var loss =
      reconstruction_loss(tape, x, dynamic_forward(tape, scd, hyper, base, th, x));
  if (hyper_grad || scd_grad) {
    tape.backward(loss);
    if (hyper_grad) {
      *hyper_grad = hyper.zeros_like();
      copy_grads(tape, th.leaves, *hyper_grad);
    }
    if (scd_grad) *scd_grad = collect_grads(tape, base);
  }
  return tape.value(loss)(0, 0);
}

void fit_dsd(AutoencoderModel& scd, HyperNetwork& hyper, std::span<const Vector> data,
             const FitOptions& options, bool joint, std::mt19937_64& rng, FitReport* report) {
  if (data.empty()) throw ContractError("train_dsd: empty training data");
  hyper.check_against(scd);
  Adam adam(AdamOptions{options.learning_rate});
  Adam scd_adam(AdamOptions{options.learning_rate});
  EarlyStopping stopper(options.patience, options.min_delta);
  HyperNetwork grad = hyper.zeros_like();
  ParameterSet scd_grad;
  std::vector<Vector> rows;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double lr = decayed_learning_rate(options.learning_rate, options.decay, epoch);
    adam.set_learning_rate(lr);
    scd_adam.set_learning_rate(lr);
    double loss_sum = 0.0;
    for (const auto& batch : minibatches(data.size(), options.batch_size, rng)) {
      rows.clear();
      for (std::size_t i : batch) rows.push_back(data[i]);
      const double loss = dsd_loss_and_grad(scd, hyper, rows, &grad, joint ? &scd_grad : nullptr);
      adam.step(hyper.slots(), grad.const_slots());
      if (joint) scd_adam.step(scd.params.slots(), grad_slots(scd_grad));
      loss_sum += loss * static_cast<double>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.size());
    if (report) report->epoch_losses.push_back(epoch_loss);
    if (stopper.update(epoch_loss)) break;
  }
}

HyperNetwork train_dsd(AutoencoderModel& scd, std::span<const Vector> data,
                       const DsdOptions& options, FitReport* report) {
  if (data.empty()) throw ContractError("train_dsd: empty training data");
  std::mt19937_64 rng(options.seed);
  HyperNetwork hyper = init_hypernetwork(scd, options, rng);
  fit_dsd(scd, hyper, data, options.fit, options.joint, rng, report);
  return hyper;
}

}  // namespace meter
