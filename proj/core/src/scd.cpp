#include "meter/scd.hpp"

#include <algorithm>
#include <numeric>

#include "meter/optim.hpp"
#include "meter/pca.hpp"

namespace meter {

MlpSpec autoencoder_spec(std::size_t feature_dim, std::size_t latent_dim,
                         const std::vector<std::size_t>& hidden) {
  if (feature_dim < 1 || latent_dim < 1) {
    throw ContractError("autoencoder: feature and latent dims must be >= 1");
  }
  std::vector<std::size_t> widths{feature_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(latent_dim);
  widths.insert(widths.end(), hidden.rbegin(), hidden.rend());
  widths.push_back(feature_dim);

  MlpSpec spec = MlpSpec::relu_hidden(widths);
  spec.activations[hidden.size()] = Activation::Identity;
  return spec;
}

MlpSpec AutoencoderModel::encoder_spec() const {
  MlpSpec s;
  s.widths.assign(spec.widths.begin(), spec.widths.begin() + encoder_layers + 1);
  s.activations.assign(spec.activations.begin(), spec.activations.begin() + encoder_layers);
  return s;
}

MlpSpec AutoencoderModel::decoder_spec() const {
  MlpSpec s;
  s.widths.assign(spec.widths.begin() + encoder_layers, spec.widths.end());
  s.activations.assign(spec.activations.begin() + encoder_layers, spec.activations.end());
  return s;
}

ParameterSet AutoencoderModel::encoder() const {
  ParameterSet p;
  p.layers.assign(params.layers.begin(), params.layers.begin() + encoder_layers);
  return p;
}

ParameterSet AutoencoderModel::decoder() const {
  ParameterSet p;
  p.layers.assign(params.layers.begin() + encoder_layers, params.layers.end());
  return p;
}

void AutoencoderModel::validate() const {
  spec.validate();
  params.check_against(spec);
  if (encoder_layers == 0 || 2 * encoder_layers != spec.layer_count()) {
    throw ShapeError("autoencoder: encoder must hold half of the layers");
  }
  const auto& w = spec.widths;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != w[w.size() - 1 - i]) throw ShapeError("autoencoder: widths are not symmetric");
  }
}

AutoencoderModel init_autoencoder(std::size_t feature_dim, std::size_t latent_dim,
                                  const std::vector<std::size_t>& hidden, std::mt19937_64& rng) {
  AutoencoderModel model;
  model.spec = autoencoder_spec(feature_dim, latent_dim, hidden);
  model.params = glorot_uniform(model.spec, rng);
  model.encoder_layers = hidden.size() + 1;
  return model;
}

double mean_squared_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("mean_squared_error: length mismatch");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

ad::Var reconstruction_loss(ad::Tape& tape, ad::Var input, ad::Var output) {
  ad::Var diff = tape.sub(input, output);
  // Mean over every entry equals the batch mean of per-sample MSE.
  return tape.mean(tape.mul(diff, diff));
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::mt19937_64& rng) {
  if (batch_size == 0) throw ContractError("minibatches: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

namespace {

Matrix gather(std::span<const Vector> data, const std::vector<std::size_t>& idx) {
  const std::size_t d = data[idx.front()].size();
  Matrix m(idx.size(), d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Vector& row = data[idx[r]];
    if (row.size() != d) throw ShapeError("training data has ragged feature vectors");
    std::copy(row.begin(), row.end(), m.row_span(r).begin());
  }
  return m;
}

}  // namespace

void fit_scd(AutoencoderModel& model, std::span<const Vector> data, const FitOptions& options,
             std::mt19937_64& rng, FitReport* report) {
  if (data.empty()) throw ContractError("train_scd: empty training data");
  model.validate();
  Adam adam(AdamOptions{options.learning_rate});
  EarlyStopping stopper(options.patience, options.min_delta);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    adam.set_learning_rate(decayed_learning_rate(options.learning_rate, options.decay, epoch));
    double loss_sum = 0.0;
    for (const auto& batch : minibatches(data.size(), options.batch_size, rng)) {
      ad::Tape tape;
      const auto layers = record(tape, model.params, true);
      const ad::Var x = tape.constant(gather(data, batch));
      const ad::Var loss = reconstruction_loss(tape, x, mlp_forward(tape, layers, model.spec, x));
      tape.backward(loss);
      const ParameterSet grads = collect_grads(tape, layers);
      adam.step(model.params.slots(), grad_slots(grads));
      loss_sum += tape.value(loss)(0, 0) * static_cast<double>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.size());
    if (report) report->epoch_losses.push_back(epoch_loss);
    if (stopper.update(epoch_loss)) break;
  }
}

AutoencoderModel train_scd(std::span<const Vector> history, const ScdOptions& options,
                           FitReport* report) {
  if (history.empty()) throw ContractError("train_scd: empty history");
  const std::size_t d = history.front().size();
  for (const auto& x : history)
    if (x.size() != d) throw ShapeError("train_scd: feature dims are not uniform");

  std::size_t latent = options.latent_dim;
  if (latent == 0) {
    latent = history.size() >= 2
                 ? pca_latent_dim(std::vector<Vector>(history.begin(), history.end()),
                                  options.explained_variance)
                 : 1;
  }
  std::vector<std::size_t> hidden = options.hidden;
  if (hidden.empty() && d > latent + 1) hidden.push_back((d + latent + 1) / 2);

  std::mt19937_64 rng(options.seed);
  AutoencoderModel model = init_autoencoder(d, latent, hidden, rng);
  fit_scd(model, history, options.fit, rng, report);
  return model;
}

Vector reconstruct(const AutoencoderModel& model, std::span<const double> x) {
  return mlp_forward(model.params, model.spec, x);
}

AnomalyScore score(const AutoencoderModel& model, std::span<const double> x) {
  const Vector y = reconstruct(model, x);
  return AnomalyScore{mean_squared_error(x, y), ScoreSource::Static};
}

}  // namespace meter
