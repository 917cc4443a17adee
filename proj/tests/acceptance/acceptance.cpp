// Acceptance run: one PASS/FAIL line per criterion.
//   meter_acceptance            all criteria
//   meter_acceptance --only 5   a single criterion
// Criterion 10 needs METER_INSECTS_CSV (header row, 0/1 `label` column);
// without it the line reads SKIP.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meter/meter.hpp"
#include "meter/ous.hpp"
#include "oracles.hpp"

using namespace meter;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  enum Kind { Pass, Fail, Skip } kind;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ----
Outcome gradients() {
  const auto t0 = Clock::now();
  double scd = 0, iec = 0, dsd = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    scd = std::max(scd, oracle::scd_gradient_error(1000 + seed));
    iec = std::max(iec, oracle::iec_gradient_error(2000 + seed));
    dsd = std::max(dsd, oracle::dsd_gradient_error(3000 + seed));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({scd, iec, dsd});
  return verdict(worst < 1e-4 && secs < 30.0,
                 fmt("max rel err SCD %.2e, IEC %.2e, DSD %.2e over 20 seeds each, %.1f s", scd, iec, dsd, secs));
}

// ---- 2 ----
Outcome evidential() {
  const double u11 = concept_uncertainty(Vector{1, 1});
  const double want = -0.5 + std::numbers::ln2;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> log_a(-4.0, 8.0);
  double worst_sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto o = opinion_from_alpha({std::exp(log_a(rng)), std::exp(log_a(rng))});
    worst_sum = std::max(worst_sum, std::abs(o.probability[0] + o.probability[1] - 1.0));
  }
  bool decreasing = true;
  double prev = INFINITY;
  for (double a : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
    const double u = concept_uncertainty(Vector{a, a});
    decreasing = decreasing && u < prev;
    prev = u;
  }
  return verdict(std::abs(u11 - want) < 1e-6 && worst_sum < 1e-12 && decreasing,
                 fmt("U(1,1) = %.9f (target %.9f), max |sum p - 1| = %.1e, strictly decreasing on (a,a): %s", u11,
                     want, worst_sum, decreasing ? "yes" : "no"));
}

// ---- 3 ----
Outcome zero_shift() {
  std::mt19937_64 rng(11);
  std::size_t mismatches = 0;
  std::size_t checked = 0;
  for (int arch = 0; arch < 10; ++arch) {
    const auto scd = oracle::random_autoencoder(rng);
    DsdOptions opt;
    opt.embed_dim = 1 + rng() % 16;
    opt.share_hidden = 1 + rng() % 32;
    // Fresh hypernetwork: random first layers, zero output layers.
    const auto hyper = init_hypernetwork(scd, opt, rng);
    for (int i = 0; i < 1000; ++i) {
      const Vector x = oracle::random_vector(scd.feature_dim(), rng, 3.0);
      const double s = score(scd, x).value;
      const double d = dynamic_score(scd, hyper, x).value;
      mismatches += std::memcmp(&s, &d, sizeof s) != 0;
      ++checked;
    }
  }
  return verdict(mismatches == 0, fmt("%zu of %zu instances bitwise equal over 10 architectures", checked - mismatches, checked));
}

// ---- 4 ----
Outcome metric_oracles() {
  std::mt19937_64 rng(13);
  double roc = 0, pr = 0;
  std::vector<double> s;
  std::vector<int> y;
  for (int rep = 0; rep < 100; ++rep) {
    oracle::random_problem(200, rng, s, y);
    roc = std::max(roc, std::abs(aucroc(s, y) - oracle::brute_aucroc(s, y)));
    pr = std::max(pr, std::abs(aucpr(s, y) - oracle::brute_aucpr(s, y)));
  }
  return verdict(roc < 1e-12 && pr < 1e-12,
                 fmt("max |diff| AUCROC %.1e, AUCPR %.1e on 100 tied problems of n=200", roc, pr));
}

// ---- 5 and 6 share one ablation run ----

DriftScript acceptance_script() {
  DriftScript s;
  for (std::size_t g = 0; g < 4; ++g) s.segments.push_back({g, 5000, DriftStyle::Abrupt, 0, 0.02, 0.0});
  return s;
}

struct DriftStats {
  std::size_t onsets = 0;
  std::size_t rising = 0;          // onsets with mean U after > before
  std::size_t updated = 0;         // onsets with an update within 3 * delta_l
  double mean_before = 0, mean_after = 0;
};

struct AblationRun {
  std::vector<AblationRow> rows;
  std::vector<DriftStats> drift;  // full METER, per seed
  double seconds = 0.0;
};

const AblationRun& ablation_run() {
  static std::unique_ptr<AblationRun> cache;
  if (cache) return *cache;
  cache = std::make_unique<AblationRun>();
  const MeterConfig cfg;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto t0 = Clock::now();
  cache->rows = run_ablation(acceptance_script(), cfg, seeds,
                             [&](const AblationRow& row, const StreamResult& r, const PreparedData& prep) {
                               std::fprintf(stderr, "  seed %llu %-14s AUCROC %.4f updates %zu\n",
                                            static_cast<unsigned long long>(row.seed), row.variant.c_str(),
                                            row.metrics.aucroc.value_or(NAN), row.metrics.updates);
                               if (row.variant != "METER") return;
                               const std::size_t span = 2 * cfg.ous.delta_l;
                               DriftStats st;
                               for (const auto& o : drift_response(r.decisions, prep.onsets, 0.0, span)) {
                                 ++st.onsets;
                                 st.rising += o.mean_u_after > o.mean_u_before;
                                 st.updated += o.update_lag && *o.update_lag <= 3 * cfg.ous.delta_l;
                                 st.mean_before += o.mean_u_before;
                                 st.mean_after += o.mean_u_after;
                               }
                               if (st.onsets) {
                                 st.mean_before /= static_cast<double>(st.onsets);
                                 st.mean_after /= static_cast<double>(st.onsets);
                               }
                               cache->drift.push_back(st);
                             });
  cache->seconds = seconds_since(t0);
  return *cache;
}

double mean_auc(const std::vector<AblationRow>& rows, const std::string& variant) {
  double s = 0;
  int n = 0;
  for (const auto& r : rows)
    if (r.variant == variant && r.metrics.aucroc) {
      s += *r.metrics.aucroc;
      ++n;
    }
  return n ? s / n : NAN;
}

Outcome ablation() {
  const auto& run = ablation_run();
  const double full = mean_auc(run.rows, "METER");
  const double s = mean_auc(run.rows, "METER-S");
  const double sd = mean_auc(run.rows, "METER-S+D");
  const double wo_iec = mean_auc(run.rows, "METER w/o IEC");
  const double wo_ous = mean_auc(run.rows, "METER w/o OUS");
  return verdict(full >= s + 0.03 && full >= wo_ous && run.seconds < 300.0,
                 fmt("5-seed mean AUCROC: METER %.4f, METER-S %.4f, S+D %.4f, w/o IEC %.4f, w/o OUS %.4f; %.0f s",
                     full, s, sd, wo_iec, wo_ous, run.seconds));
}

Outcome drift_response_check() {
  const auto& run = ablation_run();
  std::size_t rising_seeds = 0;
  std::size_t onsets = 0, rising = 0, updated = 0;
  double before = 0, after = 0;
  for (const auto& st : run.drift) {
    rising_seeds += st.onsets > 0 && st.rising == st.onsets;
    onsets += st.onsets;
    rising += st.rising;
    updated += st.updated;
    before += st.mean_before / static_cast<double>(run.drift.size());
    after += st.mean_after / static_cast<double>(run.drift.size());
  }
  return verdict(rising_seeds >= 4 && updated == onsets && onsets > 0,
                 fmt("U rises at every onset in %zu/5 seeds (%zu/%zu onsets; mean U %.2e -> %.2e); "
                     "update within 3*dL at %zu/%zu onsets",
                     rising_seeds, rising, onsets, before, after, updated, onsets));
}

// ---- 7 ----
Outcome ous_bookkeeping() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  WindowState w(64, 3200, 0.5, 0.05);
  double worst = 0.0;
  std::size_t triggers = 0;
  for (int i = 0; i < 10000; ++i) {
    if (w.observe(Vector{0.0}, u(rng))) {
      ++triggers;
      w.reset();
    }
    worst = std::max(worst, std::abs(w.sum() - w.brute_force_sum()));
  }

  // Hand cases: {uncertainties}, mu_e, mu_o, t_max, expected trigger after the last observe.
  struct Case {
    std::vector<double> us;
    double mu_e, mu_o;
    std::size_t t_max;
    bool expect;
  };
  const std::vector<Case> cases{
      {{0.02, 0.001, 0.05}, 0.01, 0.06, 1000, true},   // S = 0.07 > 0.06
      {{0.02, 0.001, 0.03}, 0.01, 0.06, 1000, false},  // S = 0.05
      {{0.0, 0.0, 0.0, 0.0}, 0.0, 0.0, 4, false},      // dt = t_max
      {{0.0, 0.0, 0.0, 0.0, 0.0}, 0.0, 0.0, 4, true},  // dt = t_max + 1, S = 0
      {{0.01, 0.01}, 0.01, 0.0, 100, false},           // U = mu_e is not counted
      {{0.5, 0.5}, 0.1, 1.0, 100, false},              // S = mu_o is not enough
  };
  std::size_t ok = 0;
  for (const auto& c : cases) {
    WindowState ws(64, c.t_max, c.mu_o, c.mu_e);
    bool t = false;
    for (double v : c.us) t = ws.observe(Vector{0.0}, v);
    ok += t == c.expect;
  }
  return verdict(worst < 1e-9 && ok == cases.size(),
                 fmt("max |S - brute force| = %.1e over 1e4 observes (%zu triggers); truth table %zu/%zu", worst,
                     triggers, ok, cases.size()));
}

// ---- 8 ----
std::string traced_run(const MeterConfig& cfg, const PreparedData& prep, std::size_t* updates) {
  const Snapshot snap = train(features_of(prep.history), cfg);
  const auto r = run_stream(std::make_shared<const Snapshot>(snap), features_of(prep.stream), cfg);
  if (updates) *updates = r.updates.size();
  std::ostringstream out;
  out << to_json(snap) << '\n';
  write_trace(out, r.decisions);
  return out.str();
}

Outcome reproducibility() {
  DriftScript s;
  s.segments = {{0, 2500, DriftStyle::Abrupt, 0, 0.02, 0.0}, {1, 2500, DriftStyle::Abrupt, 0, 0.02, 0.0}};
  MeterConfig cfg;
  cfg.seed = 8;
  const auto prep = prepare(generate_drift_stream(s, cfg.seed), cfg);
  std::size_t updates = 0;
  const std::string a = traced_run(cfg, prep, &updates);
  const std::string b = traced_run(cfg, prep, nullptr);

  MeterConfig quiet = cfg;
  quiet.ous.t_max = 1u << 30;
  quiet.ous.mu_o_absolute = 1e300;
  auto snap = std::make_shared<const Snapshot>(train(features_of(prep.history), quiet));
  const auto xs = features_of(prep.stream);
  const auto sync = run_stream(snap, xs, quiet);
  MeterConfig async_cfg = quiet;
  async_cfg.async = true;
  const auto async = run_stream(snap, xs, async_cfg);
  bool same_scores = sync.decisions.size() == async.decisions.size() && async.updates.empty();
  for (std::size_t i = 0; same_scores && i < sync.decisions.size(); ++i)
    same_scores = sync.decisions[i].score.value == async.decisions[i].score.value;
  return verdict(a == b && same_scores,
                 fmt("sync train+stream byte-identical: %s (%zu bytes, %zu updates); async without updates "
                     "score-identical: %s",
                     a == b ? "yes" : "no", a.size(), updates, same_scores ? "yes" : "no"));
}

// ---- 9 ----
Outcome throughput() {
  DriftScript s;
  s.dim = 33;
  s.segments = {{0, 10000, DriftStyle::Abrupt, 0, 0.02, 0.0}, {1, 10000, DriftStyle::Abrupt, 0, 0.02, 0.0}};
  MeterConfig cfg;
  cfg.scd.hidden = {16};  // 33 -> 16 -> z -> 16 -> 33: four layers
  const auto prep = prepare(generate_drift_stream(s, 9), cfg);
  const auto t0 = Clock::now();
  auto snap = std::make_shared<const Snapshot>(train(features_of(prep.history), cfg));
  const double train_s = seconds_since(t0);
  const auto xs = features_of(prep.stream);
  const auto t1 = Clock::now();
  const auto r = run_stream(snap, xs, cfg);
  const double infer_s = seconds_since(t1);
  const double train_rate = static_cast<double>(prep.history.size()) / train_s;
  const double infer_rate = static_cast<double>(xs.size()) / infer_s;
  return verdict(snap->scd.spec.layer_count() == 4 && infer_rate >= 1e4 && infer_rate > train_rate,
                 fmt("33 features, %zu-layer SCD: inference %.0f/s (%zu instances, %zu updates), training %.0f/s",
                     snap->scd.spec.layer_count(), infer_rate, xs.size(), r.updates.size(), train_rate));
}

// ---- 10 ----
Outcome insects() {
  const char* path = std::getenv("METER_INSECTS_CSV");
  if (!path || !*path) return {Outcome::Skip, "set METER_INSECTS_CSV to a converted INSECTS-Abr CSV to run"};
  const auto rows = load_csv(path);
  MeterConfig base;
  const auto prep = prepare(rows, base);
  const auto xs = features_of(prep.stream);
  const auto labels = labels_of(prep.stream);
  double best = -1, best_p = 0, best_e = 0;
  for (int i = 1; i <= 10; ++i) {
    for (double me : {0.001, 0.005, 0.01, 0.1, 0.2, 0.4}) {
      MeterConfig c = base;
      c.iec.mu_p = 0.05 * i;
      c.mu_e = me;
      auto snap = std::make_shared<const Snapshot>(train(features_of(prep.history), c));
      const double auc = aucroc(
          [&] {
            std::vector<double> s;
            for (const auto& d : run_stream(snap, xs, c).decisions) s.push_back(d.score.value);
            return s;
          }(),
          labels);
      std::fprintf(stderr, "  mu_p %.2f mu_e %.3f AUCROC %.4f\n", c.iec.mu_p, me, auc);
      if (auc > best) {
        best = auc;
        best_p = c.iec.mu_p;
        best_e = me;
      }
    }
  }
  return verdict(std::abs(best - 0.816) <= 0.05,
                 fmt("best AUCROC %.4f at mu_p %.2f, mu_e %.3f (target 0.816 +- 0.05)", best, best_p, best_e));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"evidential oracle", evidential},
      {"zero-shift identity", zero_shift},
      {"metric oracles", metric_oracles},
      {"ablation ordering", ablation},
      {"drift response", drift_response_check},
      {"OUS bookkeeping", ous_bookkeeping},
      {"reproducibility", reproducibility},
      {"throughput", throughput},
      {"INSECTS-Abr stretch", insects},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o{Outcome::Fail, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Skip ? "SKIP" : "FAIL";
    std::printf("%s %2zu %s: %s\n", tag, i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.kind == Outcome::Fail;
  }
  return failed ? 1 : 0;
}
