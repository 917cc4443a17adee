#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "meter/autodiff.hpp"
#include "meter/mlp.hpp"

namespace meter {

// Shared knobs of the gradient-descent loops (SCD, IEC and DSD).
struct FitOptions {
  std::size_t epochs = 1000;
  double learning_rate = 1e-2;
  // Multiplicative learning-rate decay applied after every epoch.
  double decay = 0.96;
  std::size_t batch_size = 64;
  std::size_t patience = 20;
  double min_delta = 1e-6;
};

// Per-epoch mean training loss, useful for convergence checks.
struct FitReport {
  std::vector<double> epoch_losses;
};

struct ScdOptions {
  // 0 picks the smallest PCA dimension reaching explained_variance.
  std::size_t latent_dim = 0;
  double explained_variance = 0.7;
  // Encoder hidden widths; the decoder mirrors them. Empty means one hidden
  // layer halfway between the feature and latent widths.
  std::vector<std::size_t> hidden;
  FitOptions fit;
  std::uint64_t seed = 7;
};

// Static autoencoder: layers [0, encoder_layers) form the encoder, the rest
// the decoder. Widths are symmetric around the latent layer.
struct AutoencoderModel {
  MlpSpec spec;
  ParameterSet params;
  std::size_t encoder_layers = 0;

  std::size_t feature_dim() const { return spec.input_dim(); }
  std::size_t latent_dim() const { return spec.widths.at(encoder_layers); }
  MlpSpec encoder_spec() const;
  MlpSpec decoder_spec() const;
  ParameterSet encoder() const;
  ParameterSet decoder() const;
  // Throws ShapeError when spec and params disagree or widths are asymmetric.
  void validate() const;

  friend bool operator==(const AutoencoderModel&, const AutoencoderModel&) = default;
};

enum class ScoreSource { Static, Dynamic };

struct AnomalyScore {
  double value = 0.0;  // mean squared reconstruction error
  ScoreSource source = ScoreSource::Static;
  friend bool operator==(const AnomalyScore&, const AnomalyScore&) = default;
};

// Symmetric widths [d, hidden..., latent, reversed hidden..., d]; ReLU on
// hidden layers, Identity on the latent and output layers.
MlpSpec autoencoder_spec(std::size_t feature_dim, std::size_t latent_dim,
                         const std::vector<std::size_t>& hidden);

AutoencoderModel init_autoencoder(std::size_t feature_dim, std::size_t latent_dim,
                                  const std::vector<std::size_t>& hidden, std::mt19937_64& rng);

// Trains a fresh autoencoder on the historical split.
AutoencoderModel train_scd(std::span<const Vector> history, const ScdOptions& options,
                           FitReport* report = nullptr);

// Continues minibatch training of an existing model (warm start).
void fit_scd(AutoencoderModel& model, std::span<const Vector> data, const FitOptions& options,
             std::mt19937_64& rng, FitReport* report = nullptr);

Vector reconstruct(const AutoencoderModel& model, std::span<const double> x);
AnomalyScore score(const AutoencoderModel& model, std::span<const double> x);

// sum_i (a_i - b_i)^2 / n
double mean_squared_error(std::span<const double> a, std::span<const double> b);

// Mean over a minibatch of the per-sample squared reconstruction error.
ad::Var reconstruction_loss(ad::Tape& tape, ad::Var input, ad::Var output);

// Shuffled minibatch index ranges for one epoch.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::mt19937_64& rng);

}  // namespace meter
