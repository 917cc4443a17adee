#include "meter/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "meter/error.hpp"

namespace meter {

using ojson = nlohmann::ordered_json;

namespace {

ojson matrix_json(const Matrix& m) {
  for (double v : m.values())
    if (!std::isfinite(v)) throw ContractError("serialize: non-finite matrix entry");
  return ojson{{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}};
}

Matrix matrix_from(const ojson& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

ojson vector_json(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) throw ContractError("serialize: non-finite vector entry");
  return ojson(v);
}

ojson spec_json(const MlpSpec& spec) {
  ojson acts = ojson::array();
  for (auto a : spec.activations) acts.push_back(to_string(a));
  return ojson{{"widths", spec.widths}, {"activations", acts}};
}

MlpSpec spec_from(const ojson& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  for (const auto& a : j.at("activations")) s.activations.push_back(activation_from_string(a.get<std::string>()));
  s.validate();
  return s;
}

ojson params_json(const ParameterSet& p) {
  ojson layers = ojson::array();
  for (const auto& l : p.layers) {
    layers.push_back(ojson{{"weight", matrix_json(l.weight)}, {"bias", vector_json(l.bias)}});
  }
  return layers;
}

ParameterSet params_from(const ojson& j) {
  ParameterSet p;
  for (const auto& l : j) {
    p.layers.push_back(Layer{matrix_from(l.at("weight")), l.at("bias").get<Vector>()});
  }
  return p;
}

ojson tagged(const char* kind) { return ojson{{"format", kind}, {"format_version", kFormatVersion}}; }

void expect_tag(const ojson& j, const char* kind) {
  if (j.value("format", std::string()) != kind) {
    throw DataError(std::string("expected a '") + kind + "' document");
  }
  if (j.value("format_version", -1) != kFormatVersion) {
    throw DataError(std::string("unsupported ") + kind + " format version");
  }
}

ojson autoencoder_json(const AutoencoderModel& m) {
  ojson j = tagged("meter.autoencoder");
  j["spec"] = spec_json(m.spec);
  j["encoder_layers"] = m.encoder_layers;
  j["params"] = params_json(m.params);
  return j;
}

AutoencoderModel autoencoder_from(const ojson& j) {
  expect_tag(j, "meter.autoencoder");
  AutoencoderModel m;
  m.spec = spec_from(j.at("spec"));
  m.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  m.params = params_from(j.at("params"));
  m.validate();
  return m;
}

ojson controller_json(const ControllerModel& m) {
  ojson j = tagged("meter.controller");
  j["spec"] = spec_json(m.spec);
  j["params"] = params_json(m.params);
  return j;
}

ControllerModel controller_from(const ojson& j) {
  expect_tag(j, "meter.controller");
  ControllerModel m;
  m.spec = spec_from(j.at("spec"));
  m.params = params_from(j.at("params"));
  m.params.check_against(m.spec);
  return m;
}

ojson hyper_json(const HyperNetwork& h) {
  ojson j = tagged("meter.hypernetwork");
  j["share_spec"] = spec_json(h.share_spec);
  j["share"] = params_json(h.share);
  ojson gens = ojson::array();
  for (const auto& g : h.generators) {
    gens.push_back(ojson{{"head_weight", matrix_json(g.head.weight)},
                         {"head_bias", vector_json(g.head.bias)},
                         {"w1", matrix_json(g.w1)},
                         {"b1", vector_json(g.b1)},
                         {"w2", matrix_json(g.w2)},
                         {"b2", matrix_json(g.b2)},
                         {"offset", matrix_json(g.offset)},
                         {"bias_w1", matrix_json(g.bias_w1)},
                         {"bias_b1", vector_json(g.bias_b1)},
                         {"bias_w2", matrix_json(g.bias_w2)},
                         {"bias_b2", vector_json(g.bias_b2)},
                         {"bias_offset", vector_json(g.bias_offset)}});
  }
  j["generators"] = gens;
  return j;
}

HyperNetwork hyper_from(const ojson& j) {
  expect_tag(j, "meter.hypernetwork");
  HyperNetwork h;
  h.share_spec = spec_from(j.at("share_spec"));
  h.share = params_from(j.at("share"));
  h.share.check_against(h.share_spec);
  for (const auto& g : j.at("generators")) {
    ShiftGenerator s;
    s.head = Layer{matrix_from(g.at("head_weight")), g.at("head_bias").get<Vector>()};
    s.w1 = matrix_from(g.at("w1"));
    s.b1 = g.at("b1").get<Vector>();
    s.w2 = matrix_from(g.at("w2"));
    s.b2 = matrix_from(g.at("b2"));
    s.offset = matrix_from(g.at("offset"));
    s.bias_w1 = matrix_from(g.at("bias_w1"));
    s.bias_b1 = g.at("bias_b1").get<Vector>();
    s.bias_w2 = matrix_from(g.at("bias_w2"));
    s.bias_b2 = g.at("bias_b2").get<Vector>();
    s.bias_offset = g.at("bias_offset").get<Vector>();
    h.generators.push_back(std::move(s));
  }
  return h;
}

ojson snapshot_json(const Snapshot& s) {
  ojson j = tagged("meter.snapshot");
  j["version"] = s.version;
  j["mu_e"] = s.mu_e;
  j["mu_p"] = s.mu_p;
  j["error_threshold"] = s.error_threshold;
  j["scd"] = autoencoder_json(s.scd);
  j["iec"] = s.iec ? controller_json(*s.iec) : ojson(nullptr);
  j["dsd"] = s.dsd ? hyper_json(*s.dsd) : ojson(nullptr);
  return j;
}

Snapshot snapshot_from(const ojson& j) {
  expect_tag(j, "meter.snapshot");
  Snapshot s;
  s.version = j.at("version").get<std::uint64_t>();
  s.mu_e = j.at("mu_e").get<double>();
  s.mu_p = j.at("mu_p").get<double>();
  s.error_threshold = j.at("error_threshold").get<double>();
  s.scd = autoencoder_from(j.at("scd"));
  if (!j.at("iec").is_null()) s.iec = controller_from(j.at("iec"));
  if (!j.at("dsd").is_null()) s.dsd = hyper_from(j.at("dsd"));
  s.validate();
  return s;
}

template <typename F>
auto parse_with(const std::string& text, F&& f) {
  try {
    return f(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("inconsistent model document: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(std::string("inconsistent model document: ") + e.what());
  }
}

}  // namespace

std::string to_json(const AutoencoderModel& m) { return autoencoder_json(m).dump(); }
std::string to_json(const ControllerModel& m) { return controller_json(m).dump(); }
std::string to_json(const HyperNetwork& h) { return hyper_json(h).dump(); }
std::string to_json(const Snapshot& s) { return snapshot_json(s).dump(); }

std::string to_json(const Standardizer& t) {
  ojson j = tagged("meter.standardizer");
  j["mean"] = vector_json(t.mean);
  j["stddev"] = vector_json(t.stddev);
  return j.dump();
}

AutoencoderModel autoencoder_from_json(const std::string& text) {
  return parse_with(text, autoencoder_from);
}
ControllerModel controller_from_json(const std::string& text) {
  return parse_with(text, controller_from);
}
HyperNetwork hypernetwork_from_json(const std::string& text) { return parse_with(text, hyper_from); }
Snapshot snapshot_from_json(const std::string& text) { return parse_with(text, snapshot_from); }

Standardizer standardizer_from_json(const std::string& text) {
  return parse_with(text, [](const ojson& j) {
    expect_tag(j, "meter.standardizer");
    Standardizer t{j.at("mean").get<Vector>(), j.at("stddev").get<Vector>()};
    if (t.mean.size() != t.stddev.size()) throw DataError("standardizer: length mismatch");
    return t;
  });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void save_snapshot(const std::filesystem::path& path, const Snapshot& s) {
  write_file(path, to_json(s) + "\n");
}
Snapshot load_snapshot(const std::filesystem::path& path) {
  return snapshot_from_json(read_file(path));
}
void save_standardizer(const std::filesystem::path& path, const Standardizer& t) {
  write_file(path, to_json(t) + "\n");
}
Standardizer load_standardizer(const std::filesystem::path& path) {
  return standardizer_from_json(read_file(path));
}

}  // namespace meter
