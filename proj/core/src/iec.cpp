#include "meter/iec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meter/optim.hpp"
#include "meter/special.hpp"

namespace meter {

const char* to_string(PseudoLabel label) {
  switch (label) {
    case PseudoLabel::Negative:
      return "negative";
    case PseudoLabel::Positive:
      return "positive";
    case PseudoLabel::Unknown:
      return "unknown";
  }
  return "unknown";
}

double concept_uncertainty(std::span<const double> alpha) {
  if (alpha.empty()) throw DomainError("concept_uncertainty: empty evidence vector");
  double total = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw DomainError("concept_uncertainty: evidence must be positive, got " +
                        std::to_string(a));
    }
    total += a;
  }
  const double psi_total = digamma(total + 1.0);
  double expected_term = 0.0;
  double entropy = 0.0;
  for (double a : alpha) {
    const double p = a / total;
    expected_term += p * (digamma(a + 1.0) - psi_total);
    entropy -= p * std::log(p);
  }
  // Mutual information is non-negative; clip rounding noise at the limit.
  return std::max(0.0, expected_term + entropy);
}

DirichletOpinion opinion_from_alpha(Vector alpha) {
  DirichletOpinion op;
  op.uncertainty = concept_uncertainty(alpha);
  double total = 0.0;
  for (double a : alpha) total += a;
  op.probability.resize(alpha.size());
  for (std::size_t c = 0; c < alpha.size(); ++c) op.probability[c] = alpha[c] / total;
  op.alpha = std::move(alpha);
  return op;
}

DirichletOpinion opinion(const ControllerModel& model, std::span<const double> x) {
  Vector alpha = mlp_forward(model.params, model.spec, x);
  for (double& v : alpha) v = std::exp(std::clamp(v, -kLogitClamp, kLogitClamp));
  return opinion_from_alpha(std::move(alpha));
}

PseudoLabel pseudo_label(double error, double uncertainty, double error_threshold, double mu_e) {
  if (uncertainty > mu_e) return PseudoLabel::Unknown;
  return error > error_threshold ? PseudoLabel::Positive : PseudoLabel::Negative;
}

PseudoLabel pseudo_label(const AutoencoderModel& scd, const ControllerModel* iec,
                         std::span<const double> x, double error_threshold, double mu_e) {
  const double error = score(scd, x).value;
  const double u = iec ? opinion(*iec, x).uncertainty : 0.0;
  return pseudo_label(error, u, error_threshold, mu_e);
}

double mu_p_to_threshold(std::span<const double> errors, double mu_p) {
  if (errors.empty()) throw ContractError("mu_p_to_threshold: no errors");
  if (!(mu_p > 0.0 && mu_p <= 1.0)) throw ContractError("mu_p_to_threshold: mu_p must lie in (0,1]");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::stable_sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Nearest rank, with slack so that exact products such as 0.8 * 10 stay exact.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - mu_p) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

ControllerModel init_controller(std::size_t feature_dim, std::size_t hidden,
                                std::mt19937_64& rng) {
  ControllerModel model;
  model.spec = MlpSpec::relu_hidden({feature_dim, hidden, hidden, kControllerClasses});
  model.params = glorot_uniform(model.spec, rng);
  return model;
}

double evidential_loss(std::span<const double> alpha, std::size_t label) {
  if (label >= alpha.size()) throw ContractError("evidential_loss: label out of range");
  double total = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw DomainError("evidential_loss: evidence must be positive");
    total += a;
  }
  return std::log(total) - std::log(alpha[label]);
}

ad::Var evidential_loss(ad::Tape& tape, ad::Var logits, ad::Var one_hot) {
  // log alpha_c is the clamped logit itself, so only the normaliser needs exp/log.
  const ad::Var clamped = tape.clamp(logits, -kLogitClamp, kLogitClamp);
  const ad::Var log_total = tape.log(tape.row_sum(tape.exp(clamped)));
  const ad::Var log_true = tape.row_sum(tape.mul(clamped, one_hot));
  return tape.mean(tape.sub(log_total, log_true));
}

void fit_iec(ControllerModel& model, const AutoencoderModel& scd, std::span<const Vector> data,
             const LabelPolicy& policy, const FitOptions& options, std::mt19937_64& rng,
             const LabelInjection* injection, FitReport* report, IecFitSummary* summary) {
  if (data.empty()) throw ContractError("train_iec: empty training data");
  model.params.check_against(model.spec);

  std::vector<double> errors(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) errors[i] = score(scd, data[i]).value;
  const double threshold = mu_p_to_threshold(errors, policy.mu_p);

  std::vector<char> forced(data.size(), 0);
  if (injection) {
    for (std::size_t i : injection->positive_indices)
      if (i < data.size()) forced[i] = 1;
  }

  Adam adam(AdamOptions{options.learning_rate});
  EarlyStopping stopper(options.patience, options.min_delta);
  const std::size_t d = model.spec.input_dim();
  std::vector<PseudoLabel> labels(data.size());
  IecFitSummary last;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    adam.set_learning_rate(decayed_learning_rate(options.learning_rate, options.decay, epoch));
    last = IecFitSummary{};
    last.error_threshold = threshold;
    std::vector<std::size_t> confident;
    confident.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double u =
          epoch == 0 && policy.bootstrap ? 0.0 : opinion(model, data[i]).uncertainty;
      labels[i] =
          forced[i] ? PseudoLabel::Positive : pseudo_label(errors[i], u, threshold, policy.mu_e);
      switch (labels[i]) {
        case PseudoLabel::Positive:
          ++last.positives;
          confident.push_back(i);
          break;
        case PseudoLabel::Negative:
          ++last.negatives;
          confident.push_back(i);
          break;
        case PseudoLabel::Unknown:
          ++last.unknown;
          break;
      }
    }
    if (confident.empty()) throw TrainingError("train_iec: no confident samples");

    double loss_sum = 0.0;
    for (const auto& batch : minibatches(confident.size(), options.batch_size, rng)) {
      Matrix x(batch.size(), d);
      Matrix one_hot(batch.size(), kControllerClasses);
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const std::size_t i = confident[batch[r]];
        if (data[i].size() != d) throw ShapeError("train_iec: feature dim mismatch");
        std::copy(data[i].begin(), data[i].end(), x.row_span(r).begin());
        one_hot(r, labels[i] == PseudoLabel::Positive ? 1 : 0) = 1.0;
      }
      ad::Tape tape;
      const auto layers = record(tape, model.params, true);
      const ad::Var logits = mlp_forward(tape, layers, model.spec, tape.constant(std::move(x)));
      const ad::Var loss = evidential_loss(tape, logits, tape.constant(std::move(one_hot)));
      tape.backward(loss);
      const ParameterSet grads = collect_grads(tape, layers);
      adam.step(model.params.slots(), grad_slots(grads));
      loss_sum += tape.value(loss)(0, 0) * static_cast<double>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(confident.size());
    if (report) report->epoch_losses.push_back(epoch_loss);
    if (stopper.update(epoch_loss)) break;
  }
  if (summary) *summary = last;
}

ControllerModel train_iec(const AutoencoderModel& scd, std::span<const Vector> data,
                          const IecOptions& options, const LabelInjection* injection,
                          FitReport* report, IecFitSummary* summary) {
  if (data.empty()) throw ContractError("train_iec: empty training data");
  std::mt19937_64 rng(options.seed);
  ControllerModel model = init_controller(data.front().size(), options.hidden, rng);
  fit_iec(model, scd, data, LabelPolicy{options.mu_p, options.mu_e, true}, options.fit, rng,
          injection, report, summary);
  return model;
}

}  // namespace meter
