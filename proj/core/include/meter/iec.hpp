#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "meter/mlp.hpp"
#include "meter/scd.hpp"

namespace meter {

// Dirichlet opinion over C classes: evidence alpha, expected probabilities
// p = alpha / sum(alpha), and the concept uncertainty derived from alpha.
struct DirichletOpinion {
  Vector alpha;
  Vector probability;
  double uncertainty = 0.0;

  std::size_t classes() const { return alpha.size(); }
};

enum class PseudoLabel { Negative = 0, Positive = 1, Unknown = 2 };

const char* to_string(PseudoLabel label);

// Evidential classifier; evidence = exp(clamp(logits, -30, 30)).
struct ControllerModel {
  MlpSpec spec;
  ParameterSet params;

  std::size_t classes() const { return spec.output_dim(); }
  friend bool operator==(const ControllerModel&, const ControllerModel&) = default;
};

inline constexpr double kLogitClamp = 30.0;
inline constexpr std::size_t kControllerClasses = 2;

struct IecOptions {
  std::size_t hidden = 32;
  // Fraction of the training errors labelled Positive.
  double mu_p = 0.1;
  // Uncertainty gate used while labelling; infinity keeps every sample.
  double mu_e = std::numeric_limits<double>::infinity();
  FitOptions fit;
  std::uint64_t seed = 11;
};

// Builds the opinion for evidence alpha. Throws DomainError for alpha <= 0.
DirichletOpinion opinion_from_alpha(Vector alpha);

DirichletOpinion opinion(const ControllerModel& model, std::span<const double> x);

// Mutual-information spread of Dir(alpha):
//   sum_c p_c (psi(alpha_c + 1) - psi(S + 1)) - sum_c p_c log p_c,  S = sum alpha.
double concept_uncertainty(std::span<const double> alpha);

// Unknown when U > mu_e, else Positive iff error > error_threshold.
PseudoLabel pseudo_label(double error, double uncertainty, double error_threshold, double mu_e);

// Uses the controller's uncertainty when present, otherwise U = 0 (bootstrap).
PseudoLabel pseudo_label(const AutoencoderModel& scd, const ControllerModel* iec,
                         std::span<const double> x, double error_threshold, double mu_e);

// Nearest-rank (1 - mu_p) quantile of the errors: the top mu_p fraction lies
// strictly above the returned value (up to ties).
double mu_p_to_threshold(std::span<const double> errors, double mu_p);

ControllerModel init_controller(std::size_t feature_dim, std::size_t hidden,
                                std::mt19937_64& rng);

// Per-sample loss for a one-hot label: log(sum alpha) - log(alpha_label).
double evidential_loss(std::span<const double> alpha, std::size_t label);

// Batched evidential loss on a tape: logits B x C, one-hot targets B x C.
ad::Var evidential_loss(ad::Tape& tape, ad::Var logits, ad::Var one_hot);

// Optional ground-truth positives injected into pseudo labelling. Indices
// refer to the training data handed to train_iec.
struct LabelInjection {
  std::vector<std::size_t> positive_indices;
};

struct IecFitSummary {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t unknown = 0;
  double error_threshold = 0.0;
};

ControllerModel train_iec(const AutoencoderModel& scd, std::span<const Vector> data,
                          const IecOptions& options, const LabelInjection* injection = nullptr,
                          FitReport* report = nullptr, IecFitSummary* summary = nullptr);

struct LabelPolicy {
  double mu_p = 0.1;
  double mu_e = std::numeric_limits<double>::infinity();
  // Label the first epoch with U = 0 (the controller is not trained yet).
  bool bootstrap = true;
};

// Continues training an existing controller (warm start). Pseudo labels are
// recomputed every epoch with the current controller.
void fit_iec(ControllerModel& model, const AutoencoderModel& scd, std::span<const Vector> data,
             const LabelPolicy& policy, const FitOptions& options, std::mt19937_64& rng,
             const LabelInjection* injection = nullptr, FitReport* report = nullptr,
             IecFitSummary* summary = nullptr);

}  // namespace meter
