#include "meter/eval.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "meter/error.hpp"

namespace meter {

using ojson = nlohmann::ordered_json;

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* who) {
  if (scores.size() != labels.size()) {
    throw MetricError(std::string(who) + ": scores and labels differ in length");
  }
  for (int l : labels)
    if (l != 0 && l != 1) throw MetricError(std::string(who) + ": labels must be 0 or 1");
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double aucroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "aucroc");
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw MetricError("aucroc: undefined with a single class");

  // Walk from the highest score; each tie group pairs its positives with the
  // negatives strictly below (full credit) and inside the group (half).
  const auto idx = descending(scores);
  double negatives_seen = 0.0;
  double wins = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double p = 0.0;
    double n = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? p : n) += 1.0;
      ++j;
    }
    // Positives in this group beat every negative below it.
    wins += p * (neg - negatives_seen - n) + 0.5 * p * n;
    negatives_seen += n;
    i = j;
  }
  return wins / (pos * neg);
}

double aucpr(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "aucpr");
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0.0) throw MetricError("aucpr: undefined without positives");

  const auto idx = descending(scores);
  double tp = 0.0;
  double predicted = 0.0;
  double last_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += labels[idx[j]];
      predicted += 1.0;
      ++j;
    }
    const double recall = tp / pos;
    ap += (recall - last_recall) * (tp / predicted);
    last_recall = recall;
    i = j;
  }
  return ap;
}

std::vector<OnsetResponse> drift_response(std::span<const StreamDecision> trace,
                                          std::span<const std::size_t> onsets, double mu_e,
                                          std::size_t span) {
  std::vector<OnsetResponse> out;
  for (std::size_t onset : onsets) {
    if (onset == 0 || onset >= trace.size()) continue;
    OnsetResponse r;
    r.onset = onset;
    const std::size_t lo = onset >= span ? onset - span : 0;
    const std::size_t hi = std::min(trace.size(), onset + span);
    double before = 0.0;
    for (std::size_t t = lo; t < onset; ++t) before += trace[t].uncertainty;
    double after = 0.0;
    for (std::size_t t = onset; t < hi; ++t) after += trace[t].uncertainty;
    r.mean_u_before = before / static_cast<double>(onset - lo);
    r.mean_u_after = after / static_cast<double>(hi - onset);
    for (std::size_t t = onset; t < trace.size(); ++t) {
      if (!r.detection_delay && trace[t].uncertainty > mu_e) r.detection_delay = t - onset;
      if (!r.update_lag && trace[t].update_fired) r.update_lag = t - onset;
      if (r.detection_delay && r.update_lag) break;
    }
    out.push_back(r);
  }
  return out;
}

double linearity_r2(std::span<const ThroughputSample> samples) {
  if (samples.size() < 2) throw MetricError("linearity_r2: need at least two samples");
  const double n = static_cast<double>(samples.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& s : samples) {
    mx += static_cast<double>(s.instances);
    my += s.seconds;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& s : samples) {
    const double dx = static_cast<double>(s.instances) - mx;
    const double dy = s.seconds - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 1.0;
  return (sxy * sxy) / (sxx * syy);
}

std::size_t peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return static_cast<std::size_t>(usage.ru_maxrss);  // kilobytes on Linux
}

MetricsReport compute_metrics(std::span<const StreamDecision> trace, std::span<const int> labels,
                              double wall_seconds) {
  MetricsReport m;
  m.n_scored = trace.size();
  for (const auto& d : trace) {
    (d.route == Route::Dynamic ? m.dynamic_routes : m.static_routes) += 1;
    if (d.update_fired) ++m.updates;
  }
  m.wall_seconds = wall_seconds;
  m.throughput = wall_seconds > 0.0 ? static_cast<double>(trace.size()) / wall_seconds : 0.0;
  if (labels.empty()) {
    m.metric_error = "no ground-truth labels";
    return m;
  }
  if (labels.size() != trace.size()) throw MetricError("metrics: trace and labels differ in length");
  m.n_anomalies = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  std::vector<double> scores(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) scores[i] = trace[i].score.value;
  try {
    m.aucroc = aucroc(scores, labels);
  } catch (const MetricError& e) {
    m.metric_error = e.what();
  }
  try {
    m.aucpr = aucpr(scores, labels);
  } catch (const MetricError& e) {
    if (m.metric_error.empty()) m.metric_error = e.what();
  }
  return m;
}

std::string metrics_to_json(const MetricsReport& m) {
  ojson j;
  j["aucroc"] = m.aucroc ? ojson(*m.aucroc) : ojson(nullptr);
  j["aucpr"] = m.aucpr ? ojson(*m.aucpr) : ojson(nullptr);
  if (!m.metric_error.empty()) j["metric_error"] = m.metric_error;
  j["n_scored"] = m.n_scored;
  j["n_anomalies"] = m.n_anomalies;
  j["routes"] = {{"static", m.static_routes}, {"dynamic", m.dynamic_routes}};
  j["updates"] = m.updates;
  j["throughput"] = m.throughput;
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
  MetricsReport m;
  try {
    const ojson j = ojson::parse(text);
    if (!j.at("aucroc").is_null()) m.aucroc = j.at("aucroc").get<double>();
    if (!j.at("aucpr").is_null()) m.aucpr = j.at("aucpr").get<double>();
    if (j.contains("metric_error")) m.metric_error = j.at("metric_error").get<std::string>();
    m.n_scored = j.at("n_scored").get<std::size_t>();
    m.n_anomalies = j.at("n_anomalies").get<std::size_t>();
    m.static_routes = j.at("routes").at("static").get<std::size_t>();
    m.dynamic_routes = j.at("routes").at("dynamic").get<std::size_t>();
    m.updates = j.at("updates").get<std::size_t>();
    m.throughput = j.at("throughput").get<double>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics json: ") + e.what());
  }
  return m;
}

std::string trace_line(const StreamDecision& d) {
  ojson j;
  j["t"] = d.t;
  j["score"] = d.score.value;
  j["u"] = d.uncertainty;
  j["route"] = to_string(d.route);
  j["update"] = d.update_fired;
  j["version"] = d.version;
  return j.dump();
}

void write_trace(std::ostream& out, std::span<const StreamDecision> trace) {
  for (const auto& d : trace) out << trace_line(d) << '\n';
}

void write_trace(const std::filesystem::path& path, std::span<const StreamDecision> trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace '" + path.string() + "'");
  write_trace(out, trace);
}

std::vector<StreamDecision> read_trace(std::istream& in) {
  std::vector<StreamDecision> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const ojson j = ojson::parse(line);
      StreamDecision d;
      d.t = j.at("t").get<std::size_t>();
      d.score.value = j.at("score").get<double>();
      d.uncertainty = j.at("u").get<double>();
      const auto route = j.at("route").get<std::string>();
      if (route != "static" && route != "dynamic") throw DataError("bad route '" + route + "'");
      d.route = route == "dynamic" ? Route::Dynamic : Route::Static;
      d.score.source = d.route == Route::Dynamic ? ScoreSource::Dynamic : ScoreSource::Static;
      d.update_fired = j.at("update").get<bool>();
      d.version = j.at("version").get<std::uint64_t>();
      out.push_back(d);
    } catch (const std::exception& e) {
      throw DataError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<StreamDecision> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace '" + path.string() + "'");
  return read_trace(in);
}

void write_update_log(const std::filesystem::path& path, std::span<const UpdateEvent> events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& e : events) {
    ojson j;
    j["step"] = e.step;
    j["version"] = e.version;
    j["S"] = e.window_sum;
    j["mu_e_before"] = e.mu_e_before;
    j["mu_e_after"] = e.mu_e_after;
    out << j.dump() << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, std::span<const StreamDecision> trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "t,score,u\n";
  for (const auto& d : trace) out << d.t << ',' << d.score.value << ',' << d.uncertainty << '\n';
}

}  // namespace meter

namespace meter {

PreparedData prepare(std::span<const Instance> data, const MeterConfig& config,
                     std::span<const std::size_t> onsets) {
  std::vector<Instance> rows(data.begin(), data.end());
  std::size_t shift = 0;
  if (config.shingle > 0) {
    if (!rows.empty() && rows.front().features().size() != 1) {
      throw DataError("shingling needs a single feature column, got " +
                      std::to_string(rows.front().features().size()));
    }
    std::vector<double> series;
    series.reserve(rows.size());
    for (const auto& r : rows) series.push_back(r.features()[0]);
    std::vector<Instance> lifted = shingle(series, config.shingle);
    // A window takes the label of its newest value.
    for (std::size_t t = 0; t < lifted.size(); ++t) {
      const Instance& last = rows[t + config.shingle - 1];
      if (last.has_label()) lifted[t] = Instance(lifted[t].features(), t, last.label());
    }
    rows = std::move(lifted);
    shift = config.shingle - 1;
  }
  HistorySplit split = split_history(rows, config.history_ratio);
  PreparedData out;
  if (config.standardize && !split.history.empty()) {
    StandardizedSplit s = standardize(split.history, split.stream);
    out.history = std::move(s.history);
    out.stream = std::move(s.stream);
    out.transform = s.transform;
  } else {
    out.history = std::move(split.history);
    out.stream = std::move(split.stream);
  }
  const std::size_t offset = out.history.size() + shift;
  for (std::size_t o : onsets)
    if (o > offset && o - offset < out.stream.size()) out.onsets.push_back(o - offset);
  return out;
}

std::vector<Variant> ablation_lattice() {
  return {{"METER-S", false, false, false},
          {"METER-S+D", false, true, false},
          {"METER w/o IEC", false, true, true},
          {"METER w/o OUS", true, true, false},
          {"METER", true, true, true}};
}

MeterConfig with_variant(MeterConfig config, const Variant& v) {
  config.use_iec = v.use_iec;
  config.use_dsd = v.use_dsd;
  config.use_ous = v.use_ous;
  return config;
}

std::vector<AblationRow> run_ablation(const DriftScript& script, const MeterConfig& config,
                                      std::span<const std::uint64_t> seeds,
                                      const AblationHook& hook) {
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    MeterConfig base = config;
    base.seed = seed;
    base.use_iec = base.use_dsd = true;
    const std::vector<Instance> data = generate_drift_stream(script, seed);
    const PreparedData prep = prepare(data, base, script.onsets());
    auto snapshot = std::make_shared<const Snapshot>(train(features_of(prep.history), base));
    const std::vector<Vector> xs = features_of(prep.stream);
    const std::vector<int> labels = labels_of(prep.stream);
    for (const Variant& v : ablation_lattice()) {
      const MeterConfig c = with_variant(base, v);
      const auto start = std::chrono::steady_clock::now();
      StreamResult r = run_stream(snapshot, xs, c);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      AblationRow row{v.name, seed, compute_metrics(r.decisions, labels, secs)};
      if (hook) hook(row, r, prep);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string ablation_to_json(std::span<const AblationRow> rows) {
  ojson out;
  ojson runs = ojson::array();
  std::vector<std::string> order;
  std::vector<std::pair<double, std::size_t>> sums;
  for (const auto& r : rows) {
    ojson j;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["metrics"] = ojson::parse(metrics_to_json(r.metrics));
    runs.push_back(j);
    auto it = std::find(order.begin(), order.end(), r.variant);
    if (it == order.end()) {
      order.push_back(r.variant);
      sums.emplace_back(0.0, 0);
      it = order.end() - 1;
    }
    auto& s = sums[static_cast<std::size_t>(it - order.begin())];
    if (r.metrics.aucroc) {
      s.first += *r.metrics.aucroc;
      ++s.second;
    }
  }
  ojson summary = ojson::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    summary.push_back({{"variant", order[i]},
                       {"mean_aucroc", sums[i].second ? ojson(sums[i].first / static_cast<double>(sums[i].second))
                                                      : ojson(nullptr)},
                       {"runs", sums[i].second}});
  }
  out["summary"] = summary;
  out["runs"] = runs;
  return out.dump(2);
}

}  // namespace meter
