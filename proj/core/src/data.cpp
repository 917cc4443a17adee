#include "meter/data.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "meter/error.hpp"

namespace meter {

namespace {
std::atomic<std::size_t> g_label_reads{0};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::optional<int> Instance::label() const {
  g_label_reads.fetch_add(1, std::memory_order_relaxed);
  return label_;
}

std::size_t label_read_count() { return g_label_reads.load(); }
void reset_label_read_count() { g_label_reads.store(0); }

std::vector<Vector> features_of(std::span<const Instance> instances) {
  std::vector<Vector> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.features());
  return out;
}

std::vector<int> labels_of(std::span<const Instance> instances) {
  std::vector<int> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.label().value_or(0));
  return out;
}

std::vector<Instance> parse_csv(std::istream& in, const CsvSchema& schema,
                                const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const std::vector<std::string> header = split(line, ',');

  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::optional<std::size_t> label_col = column_of(schema.label_column);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (!label_col || c != *label_col) feature_cols.push_back(c);
  } else {
    for (const auto& name : schema.feature_columns) {
      auto c = column_of(name);
      if (!c) throw DataError(source + ": missing column '" + name + "'");
      feature_cols.push_back(*c);
    }
  }
  if (feature_cols.empty()) throw DataError(source + ": no feature columns");

  std::vector<Instance> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    Vector features(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::size_t c = feature_cols[k];
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        throw DataError(source + ": row " + std::to_string(row) + ", column '" + header[c] +
                        "': not a finite number ('" + cells[c] + "')");
      }
      features[k] = v;
    }
    std::optional<int> label;
    if (label_col) {
      double v = 0.0;
      if (!parse_double(cells[*label_col], v) || (v != 0.0 && v != 1.0)) {
        throw DataError(source + ": row " + std::to_string(row) + ", column '" +
                        schema.label_column + "': label must be 0 or 1");
      }
      label = static_cast<int>(v);
    }
    out.emplace_back(std::move(features), out.size(), label);
  }
  return out;
}

std::vector<Instance> load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema, path.string());
}

void write_csv(const std::filesystem::path& path, std::span<const Instance> instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const std::size_t d = instances.empty() ? 0 : instances.front().features().size();
  const bool labelled = !instances.empty() && instances.front().has_label();
  for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << 'f' << j;
  if (labelled) out << (d ? "," : "") << "label";
  out << '\n';
  out << std::setprecision(17);
  for (const auto& inst : instances) {
    for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << inst.features()[j];
    if (labelled) out << (d ? "," : "") << inst.label().value_or(0);
    out << '\n';
  }
}

std::vector<Instance> shingle(std::span<const double> series, std::size_t width) {
  if (width < 1) throw ContractError("shingle: width must be >= 1");
  if (series.size() < width) throw ContractError("shingle: series shorter than width");
  std::vector<Instance> out;
  out.reserve(series.size() - width + 1);
  for (std::size_t t = 0; t + width <= series.size(); ++t) {
    out.emplace_back(Vector(series.begin() + static_cast<std::ptrdiff_t>(t),
                            series.begin() + static_cast<std::ptrdiff_t>(t + width)),
                     t);
  }
  return out;
}

Standardizer Standardizer::fit(std::span<const Instance> history) {
  if (history.empty()) throw ContractError("standardize: empty history");
  const std::size_t d = history.front().features().size();
  Standardizer s{Vector(d, 0.0), Vector(d, 0.0)};
  for (const auto& inst : history) {
    if (inst.features().size() != d) throw ShapeError("standardize: ragged features");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += inst.features()[j];
  }
  const double n = static_cast<double>(history.size());
  for (double& m : s.mean) m /= n;
  for (const auto& inst : history) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = inst.features()[j] - s.mean[j];
      s.stddev[j] += diff * diff;
    }
  }
  for (double& v : s.stddev) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

Vector Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ShapeError("standardize: feature dim mismatch");
  Vector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / stddev[j];
  return out;
}

std::vector<Instance> Standardizer::apply(std::span<const Instance> instances) const {
  std::vector<Instance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    Instance copy = inst;
    copy.features() = apply(inst.features());
    out.push_back(std::move(copy));
  }
  return out;
}

StandardizedSplit standardize(std::span<const Instance> history,
                              std::span<const Instance> stream) {
  Standardizer t = Standardizer::fit(history);
  return StandardizedSplit{t.apply(history), t.apply(stream), t};
}

HistorySplit split_history(std::span<const Instance> data, double history_ratio) {
  if (!(history_ratio >= 0.0 && history_ratio < 1.0)) {
    throw ContractError("split_history: ratio must lie in [0,1)");
  }
  const auto n_hist = std::min(
      data.size(),
      static_cast<std::size_t>(std::ceil(history_ratio * static_cast<double>(data.size()) - 1e-9)));
  HistorySplit s;
  s.history.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n_hist));
  s.stream.assign(data.begin() + static_cast<std::ptrdiff_t>(n_hist), data.end());
  return s;
}

const char* to_string(DriftStyle style) {
  switch (style) {
    case DriftStyle::Abrupt:
      return "abrupt";
    case DriftStyle::Gradual:
      return "gradual";
    case DriftStyle::Incremental:
      return "incremental";
  }
  return "abrupt";
}

void DriftScript::validate() const {
  if (dim < 1) throw ContractError("drift script: dim must be >= 1");
  if (segments.empty()) throw ContractError("drift script: no segments");
  if (components < 1 || rank < 1) throw ContractError("drift script: components/rank must be >= 1");
  for (const auto& s : segments) {
    if (s.length < 1) throw ContractError("drift script: segment length must be positive");
    if (!(s.anomaly_rate >= 0.0 && s.anomaly_rate < 0.5)) {
      throw ContractError("drift script: anomaly rate must lie in [0, 0.5)");
    }
  }
}

std::size_t DriftScript::total_length() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.length;
  return recurrence ? 2 * n : n;
}

std::vector<std::size_t> DriftScript::onsets() const {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  const std::size_t passes = recurrence ? 2 : 1;
  for (std::size_t p = 0; p < passes; ++p) {
    for (const auto& s : segments) {
      if (pos > 0) out.push_back(pos);
      pos += s.length;
    }
  }
  return out;
}

DriftScript DriftScript::parse(const std::string& text) {
  DriftScript script;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto number = [&](const std::string& v) {
    double x = 0.0;
    if (!parse_double(v, x)) {
      throw ConfigError("drift script line " + std::to_string(lineno) + ": bad number '" + v + "'");
    }
    return x;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("drift script line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "dim") {
      script.dim = static_cast<std::size_t>(number(value));
    } else if (key == "components") {
      script.components = static_cast<std::size_t>(number(value));
    } else if (key == "rank") {
      script.rank = static_cast<std::size_t>(number(value));
    } else if (key == "noise") {
      script.noise = number(value);
    } else if (key == "spread") {
      script.spread = number(value);
    } else if (key == "anomaly_shift") {
      script.anomaly_shift = number(value);
    } else if (key == "recurrence") {
      script.recurrence = value == "true" || value == "1";
    } else if (key == "segment") {
      DriftSegment seg;
      std::istringstream fields(value);
      std::string field;
      while (fields >> field) {
        const auto colon = field.find(':');
        if (colon == std::string::npos) {
          throw ConfigError("drift script line " + std::to_string(lineno) + ": bad field '" +
                            field + "'");
        }
        const std::string name = field.substr(0, colon);
        const std::string v = field.substr(colon + 1);
        if (name == "generator") {
          seg.generator = static_cast<std::size_t>(number(v));
        } else if (name == "length") {
          seg.length = static_cast<std::size_t>(number(v));
        } else if (name == "rate") {
          seg.anomaly_rate = number(v);
        } else if (name == "offset") {
          seg.offset = number(v);
        } else if (name == "style") {
          const auto c2 = v.find(':');
          const std::string style = v.substr(0, c2);
          if (c2 != std::string::npos) seg.transition = static_cast<std::size_t>(number(v.substr(c2 + 1)));
          if (style == "abrupt") {
            seg.style = DriftStyle::Abrupt;
          } else if (style == "gradual") {
            seg.style = DriftStyle::Gradual;
          } else if (style == "incremental") {
            seg.style = DriftStyle::Incremental;
          } else {
            throw ConfigError("drift script line " + std::to_string(lineno) +
                              ": unknown style '" + style + "'");
          }
        } else {
          throw ConfigError("drift script line " + std::to_string(lineno) +
                            ": unknown segment field '" + name + "'");
        }
      }
      script.segments.push_back(seg);
    } else {
      throw ConfigError("drift script line " + std::to_string(lineno) + ": unknown key '" + key +
                        "'");
    }
  }
  script.validate();
  return script;
}

DriftScript DriftScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open drift script '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string DriftScript::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "dim = " << dim << "\ncomponents = " << components << "\nrank = " << rank
     << "\nnoise = " << noise << "\nspread = " << spread << "\nanomaly_shift = " << anomaly_shift
     << "\nrecurrence = " << (recurrence ? "true" : "false") << '\n';
  for (const auto& s : segments) {
    os << "segment = generator:" << s.generator << " length:" << s.length
       << " style:" << to_string(s.style);
    if (s.transition) os << ':' << s.transition;
    os << " rate:" << s.anomaly_rate << " offset:" << s.offset << '\n';
  }
  return os.str();
}

namespace {

// Parameters of one concept: a mixture of low-rank-plus-noise Gaussians.
struct Concept {
  std::vector<Vector> means;     // per component, length dim
  std::vector<Matrix> loadings;  // per component, dim x rank
};

Concept make_concept(const DriftScript& script, std::uint64_t seed, std::size_t generator) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(generator), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Concept c;
  const double load_scale = 1.0 / std::sqrt(static_cast<double>(script.rank));
  for (std::size_t k = 0; k < script.components; ++k) {
    Vector mean(script.dim);
    for (double& m : mean) m = script.spread * normal(rng);
    Matrix load(script.dim, script.rank);
    for (double& v : load.values()) v = load_scale * normal(rng);
    c.means.push_back(std::move(mean));
    c.loadings.push_back(std::move(load));
  }
  return c;
}

Concept blend(const Concept& from, const Concept& to, double lambda) {
  Concept c = to;
  for (std::size_t k = 0; k < c.means.size(); ++k) {
    for (std::size_t j = 0; j < c.means[k].size(); ++j) {
      c.means[k][j] = (1.0 - lambda) * from.means[k][j] + lambda * to.means[k][j];
    }
    for (std::size_t i = 0; i < c.loadings[k].size(); ++i) {
      c.loadings[k].data()[i] =
          (1.0 - lambda) * from.loadings[k].data()[i] + lambda * to.loadings[k].data()[i];
    }
  }
  return c;
}

}  // namespace

std::vector<Instance> generate_drift_stream(const DriftScript& script, std::uint64_t seed) {
  script.validate();
  std::vector<DriftSegment> plan = script.segments;
  if (script.recurrence) plan.insert(plan.end(), script.segments.begin(), script.segments.end());

  std::vector<Concept> concepts;
  auto concept_of = [&](std::size_t g) -> const Concept& {
    while (concepts.size() <= g) concepts.push_back(make_concept(script, seed, concepts.size()));
    return concepts[g];
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, script.components - 1);

  std::vector<Instance> out;
  out.reserve(script.total_length());
  for (std::size_t s = 0; s < plan.size(); ++s) {
    const DriftSegment& seg = plan[s];
    const DriftSegment* prev = s > 0 ? &plan[s - 1] : nullptr;
    const std::size_t transition =
        prev && seg.style != DriftStyle::Abrupt ? std::min(seg.transition, seg.length) : 0;
    for (std::size_t i = 0; i < seg.length; ++i) {
      const Concept* source = &concept_of(seg.generator);
      double offset = seg.offset;
      Concept blended;
      if (i < transition) {
        const double lambda = static_cast<double>(i + 1) / static_cast<double>(transition + 1);
        if (seg.style == DriftStyle::Gradual) {
          if (unit(rng) >= lambda) {
            source = &concept_of(prev->generator);
            offset = prev->offset;
          }
        } else {
          blended = blend(concept_of(prev->generator), concept_of(seg.generator), lambda);
          source = &blended;
          offset = (1.0 - lambda) * prev->offset + lambda * seg.offset;
        }
      }
      const std::size_t k = pick(rng);
      Vector z(script.rank);
      for (double& v : z) v = normal(rng);
      Vector x(script.dim);
      const Matrix& load = source->loadings[k];
      for (std::size_t j = 0; j < script.dim; ++j) {
        double acc = source->means[k][j] + offset + script.noise * normal(rng);
        for (std::size_t r = 0; r < script.rank; ++r) acc += load(j, r) * z[r];
        x[j] = acc;
      }
      int label = 0;
      if (unit(rng) < seg.anomaly_rate) {
        label = 1;
        Vector dir(script.dim);
        double norm = 0.0;
        for (double& v : dir) {
          v = normal(rng);
          norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < script.dim; ++j) {
          x[j] += script.anomaly_shift * dir[j] / norm;
        }
      }
      out.emplace_back(std::move(x), out.size(), label);
    }
  }
  return out;
}

}  // namespace meter
