#include "meter/ous.hpp"

#include <algorithm>
#include <cstdio>

#include "meter/error.hpp"

namespace meter {

namespace {
// Incremental sums drift by rounding; recompute from scratch this often.
constexpr std::size_t kResyncEvery = 4096;
}  // namespace

WindowState::WindowState(std::size_t delta_l, std::size_t t_max, double mu_o, double mu_e)
    : entries_(delta_l), t_max_(t_max), mu_o_(mu_o), mu_e_(mu_e) {
  if (delta_l < 1) throw ContractError("window: delta_l must be >= 1");
}

bool WindowState::observe(std::span<const double> x, double u) {
  if (!(u >= 0.0)) throw DomainError("window: uncertainty must be >= 0");
  Entry& slot = entries_[head_];
  if (size_ == entries_.size()) sum_ -= contribution(slot);
  slot.x.assign(x.begin(), x.end());
  slot.u = u;
  slot.live = true;
  sum_ += contribution(slot);
  head_ = (head_ + 1) % entries_.size();
  size_ = std::min(size_ + 1, entries_.size());
  ++dt_;
  if (++since_resync_ >= kResyncEvery) resync();
  return triggered();
}

void WindowState::reset() {
  for (auto& e : entries_) e.live = false;
  sum_ = 0.0;
  dt_ = 0;
}

void WindowState::set_mu_e(double mu_e) {
  mu_e_ = mu_e;
  resync();
}

void WindowState::resync() {
  sum_ = brute_force_sum();
  since_resync_ = 0;
}

double WindowState::brute_force_sum() const {
  double s = 0.0;
  for (std::size_t k = 0; k < size_; ++k) {
    const std::size_t i = (head_ + entries_.size() - size_ + k) % entries_.size();
    s += contribution(entries_[i]);
  }
  return s;
}

std::vector<Vector> WindowState::instances() const {
  std::vector<Vector> out;
  out.reserve(size_);
  for (std::size_t k = 0; k < size_; ++k) {
    out.push_back(entries_[(head_ + entries_.size() - size_ + k) % entries_.size()].x);
  }
  return out;
}

std::vector<double> WindowState::uncertainties() const {
  std::vector<double> out;
  out.reserve(size_);
  for (std::size_t k = 0; k < size_; ++k) {
    out.push_back(entries_[(head_ + entries_.size() - size_ + k) % entries_.size()].u);
  }
  return out;
}

double mu_o_for(const OusOptions& options, double mu_e) {
  if (options.mu_o_absolute) return *options.mu_o_absolute;
  return options.mu_o_fraction * static_cast<double>(options.delta_l) * mu_e;
}

double update_mu_e(double mu_e, std::span<const double> window, double beta) {
  if (window.empty()) throw ContractError("update_mu_e: empty window");
  const double peak = *std::max_element(window.begin(), window.end());
  return beta * mu_e + (1.0 - beta) * peak;
}

void Snapshot::validate() const {
  scd.validate();
  if (iec) {
    iec->params.check_against(iec->spec);
    if (iec->spec.input_dim() != scd.feature_dim()) {
      throw ShapeError("snapshot: controller input dim differs from the autoencoder");
    }
  }
  if (dsd) dsd->check_against(scd);
}

Snapshot update_models(const Snapshot& base, std::span<const Vector> window,
                       std::span<const double> window_uncertainties,
                       const FinetuneOptions& options) {
  Snapshot next = base;
  next.version = base.version + 1;
  if (window.empty()) {
    std::fprintf(stderr, "meter: update skipped, empty window\n");
    return next;
  }
  if (!window_uncertainties.empty()) {
    next.mu_e = update_mu_e(base.mu_e, window_uncertainties, options.beta);
  }
  if (options.epochs == 0) return next;

  FitOptions fit = options.fit;
  fit.epochs = options.epochs;
  std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ull + base.version);

  fit_scd(next.scd, window, fit, rng);
  if (next.iec && options.update_iec) {
    IecFitSummary summary;
    try {
      fit_iec(*next.iec, next.scd, window, LabelPolicy{base.mu_p, next.mu_e, true}, fit, rng,
              nullptr, nullptr, &summary);
      next.error_threshold = summary.error_threshold;
    } catch (const TrainingError&) {
      // every window sample was Unknown; keep the previous controller
    }
  }
  if (next.dsd && options.update_dsd) fit_dsd(next.scd, *next.dsd, window, fit, false, rng);
  return next;
}

SnapshotCell::SnapshotCell(std::shared_ptr<const Snapshot> initial) : current_(std::move(initial)) {
  if (!current_) throw ContractError("snapshot cell: null snapshot");
}

std::shared_ptr<const Snapshot> SnapshotCell::load() const {
  std::lock_guard lock(mu_);
  return current_;
}

void SnapshotCell::publish(std::shared_ptr<const Snapshot> next) {
  if (!next) throw ContractError("snapshot cell: null snapshot");
  std::lock_guard lock(mu_);
  if (next->version <= current_->version) {
    throw ContractError("snapshot cell: version " + std::to_string(next->version) +
                        " does not exceed " + std::to_string(current_->version));
  }
  current_ = std::move(next);
}

std::uint64_t SnapshotCell::version() const {
  std::lock_guard lock(mu_);
  return current_->version;
}

AsyncUpdater::AsyncUpdater(SnapshotCell& cell, FinetuneOptions options, Hook on_publish)
    : cell_(cell), options_(options), on_publish_(std::move(on_publish)) {
  worker_ = std::thread([this] { run(); });
}

AsyncUpdater::~AsyncUpdater() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

bool AsyncUpdater::submit(std::vector<Vector> window, std::vector<double> uncertainties) {
  {
    std::lock_guard lock(mu_);
    if (busy_) {
      ++dropped_;
      return false;
    }
    busy_ = true;
    job_.emplace(std::move(window), std::move(uncertainties));
  }
  cv_.notify_all();
  return true;
}

void AsyncUpdater::wait_idle() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return !busy_; });
}

std::size_t AsyncUpdater::completed() const {
  std::lock_guard lock(mu_);
  return completed_;
}

std::size_t AsyncUpdater::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

void AsyncUpdater::run() {
  for (;;) {
    std::pair<std::vector<Vector>, std::vector<double>> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || job_.has_value(); });
      if (!job_) return;
      job = std::move(*job_);
      job_.reset();
    }
    const auto base = cell_.load();
    try {
      auto next = std::make_shared<const Snapshot>(
          update_models(*base, job.first, job.second, options_));
      cell_.publish(next);
      if (on_publish_) on_publish_(*base, *next);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "meter: background update failed: %s\n", e.what());
    }
    {
      std::lock_guard lock(mu_);
      ++completed_;
      busy_ = false;
    }
    cv_.notify_all();
  }
}

}  // namespace meter
