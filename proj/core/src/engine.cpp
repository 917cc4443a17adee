#include "meter/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meter/error.hpp"

namespace meter {

namespace {

std::uint64_t mix_seed(std::uint64_t module_seed, std::uint64_t run_seed) {
  return module_seed + 0x9E3779B97F4A7C15ull * (run_seed + 1);
}

}  // namespace

const char* to_string(Route route) { return route == Route::Dynamic ? "dynamic" : "static"; }

FinetuneOptions finetune_options(const MeterConfig& config) {
  FinetuneOptions f;
  f.epochs = config.ous.finetune_epochs;
  f.fit = config.scd.fit;
  f.beta = config.ous.beta;
  f.update_iec = config.use_iec;
  f.update_dsd = config.use_dsd;
  f.seed = config.seed;
  return f;
}

namespace {

Snapshot train_impl(std::span<const Vector> history, const MeterConfig& config,
                    const LabelInjection* injection, TrainReport* report) {
  if (history.empty()) throw ContractError("train: empty history");
  config.validate();
  TrainReport local;
  TrainReport& r = report ? *report : local;

  Snapshot snap;
  ScdOptions scd = config.scd;
  scd.seed = mix_seed(config.scd.seed, config.seed);
  snap.scd = train_scd(history, scd, &r.scd);
  snap.mu_p = config.iec.mu_p;

  if (config.use_iec) {
    IecOptions iec = config.iec;
    iec.seed = mix_seed(config.iec.seed, config.seed);
    snap.iec = train_iec(snap.scd, history, iec, injection, &r.iec, &r.labels);
    snap.error_threshold = r.labels.error_threshold;
  }
  if (config.use_dsd) {
    DsdOptions dsd = config.dsd;
    dsd.seed = mix_seed(config.dsd.seed, config.seed);
    snap.dsd = train_dsd(snap.scd, history, dsd, &r.dsd);
  }

  double max_u = 0.0;
  if (snap.iec) {
    for (const auto& x : history) max_u = std::max(max_u, opinion(*snap.iec, x).uncertainty);
  }
  snap.mu_e = config.mu_e.value_or(max_u);
  return snap;
}

}  // namespace

Snapshot train(std::span<const Instance> history, const MeterConfig& config,
               TrainReport* report) {
  const std::vector<Vector> x = features_of(history);
  if (config.inject_labels <= 0.0) return train_impl(x, config, nullptr, report);

  // Labelled variant: a fraction of the true anomalies is forced Positive.
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < history.size(); ++i)
    if (history[i].label().value_or(0) == 1) positives.push_back(i);
  std::mt19937_64 rng(mix_seed(17, config.seed));
  std::shuffle(positives.begin(), positives.end(), rng);
  const auto keep = static_cast<std::size_t>(
      std::ceil(config.inject_labels * static_cast<double>(positives.size()) - 1e-9));
  positives.resize(std::min(keep, positives.size()));
  std::sort(positives.begin(), positives.end());
  const LabelInjection injection{positives};
  return train_impl(x, config, &injection, report);
}

Snapshot train(std::span<const Vector> history, const MeterConfig& config, TrainReport* report) {
  return train_impl(history, config, nullptr, report);
}

StreamDecision score_instance(const Snapshot& snap, std::span<const double> x,
                              const MeterConfig& config, std::size_t t) {
  if (x.size() != snap.feature_dim()) {
    throw ShapeError("step " + std::to_string(t) + ": instance has " + std::to_string(x.size()) +
                     " features, model expects " + std::to_string(snap.feature_dim()));
  }
  StreamDecision d;
  d.t = t;
  d.version = snap.version;
  const bool controller = config.use_iec && snap.iec.has_value();
  if (controller) d.uncertainty = opinion(*snap.iec, x).uncertainty;
  const bool dynamic =
      config.use_dsd && snap.dsd.has_value() && (!controller || d.uncertainty > snap.mu_e);
  if (dynamic) {
    d.route = Route::Dynamic;
    d.score = dynamic_score(snap.scd, *snap.dsd, x);
  } else {
    d.route = Route::Static;
    d.score = score(snap.scd, x);
  }
  return d;
}

StreamEngine::StreamEngine(std::shared_ptr<const Snapshot> snapshot, const MeterConfig& config)
    : config_(config),
      finetune_(finetune_options(config)),
      cell_(std::move(snapshot)),
      window_(config.ous.delta_l, config.ous.t_max,
              mu_o_for(config.ous, cell_.load()->mu_e), cell_.load()->mu_e) {
  config_.validate();
  window_version_ = cell_.version();
  if (config_.use_ous && config_.async) {
    updater_ = std::make_unique<AsyncUpdater>(cell_, finetune_);
  }
}

StreamEngine::~StreamEngine() = default;

void StreamEngine::adopt(const Snapshot& snap) {
  // A background update landed: credit it to the submission still pending.
  for (auto it = updates_.rbegin(); it != updates_.rend(); ++it) {
    if (it->version == 0) {
      it->version = snap.version;
      it->mu_e_after = snap.mu_e;
      break;
    }
  }
  window_.set_mu_e(snap.mu_e);
  window_.set_mu_o(mu_o_for(config_.ous, snap.mu_e));
  window_version_ = snap.version;
}

StreamDecision StreamEngine::step(std::span<const double> x) {
  const auto snap = cell_.load();
  if (snap->version != window_version_) adopt(*snap);

  StreamDecision d = score_instance(*snap, x, config_, t_);
  const bool trigger = window_.observe(x, d.uncertainty);
  if (trigger && config_.use_ous) {
    d.update_fired = true;
    UpdateEvent ev;
    ev.step = t_;
    ev.window_sum = window_.sum();
    ev.mu_e_before = snap->mu_e;
    if (updater_) {
      if (updater_->submit(window_.instances(), window_.uncertainties())) {
        updates_.push_back(ev);  // version 0 until the result is adopted
      }
    } else {
      auto next = std::make_shared<const Snapshot>(
          update_models(*snap, window_.instances(), window_.uncertainties(), finetune_));
      cell_.publish(next);
      ev.version = next->version;
      ev.mu_e_after = next->mu_e;
      updates_.push_back(ev);
      adopt(*next);
    }
    window_.reset();
  }
  ++t_;
  return d;
}

void StreamEngine::drain() {
  if (!updater_) return;
  updater_->wait_idle();
  const auto snap = cell_.load();
  if (snap->version != window_version_) adopt(*snap);
}

StreamResult run_stream(std::shared_ptr<const Snapshot> snapshot, std::span<const Vector> stream,
                        const MeterConfig& config, const DecisionSink& sink) {
  StreamEngine engine(std::move(snapshot), config);
  StreamResult result;
  result.decisions.reserve(stream.size());
  for (const auto& x : stream) {
    result.decisions.push_back(engine.step(x));
    if (sink) sink(result.decisions.back());
  }
  engine.drain();
  result.updates = engine.updates();
  result.final_snapshot = engine.snapshot();
  return result;
}

}  // namespace meter
