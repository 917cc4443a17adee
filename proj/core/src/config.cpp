#include "meter/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

#include "meter/error.hpp"

namespace meter {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': " + what + ", got '" + value + "'");
}

double as_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  if (v.empty() || ec != std::errc() || ptr != e) bad_value(key, v, "expected a number");
  return out;
}

std::uint64_t as_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, v, "expected a non-negative integer");
  }
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "expected true/false");
}

std::vector<std::size_t> as_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "auto") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto w = as_count(key, trim(item));
    if (w < 1) bad_value(key, v, "widths must be >= 1");
    out.push_back(w);
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_widths(const std::vector<std::size_t>& w) {
  if (w.empty()) return "auto";
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<void(MeterConfig&, const std::string&)> set;
  std::function<std::string(const MeterConfig&)> get;
};

void add_fit_keys(std::vector<Key>& keys, const std::string& prefix,
                  FitOptions& (*ref)(MeterConfig&), const FitOptions& (*cref)(const MeterConfig&)) {
  keys.push_back({prefix + ".epochs",
                  [=](MeterConfig& c, const std::string& v) { ref(c).epochs = as_count(prefix + ".epochs", v); },
                  [=](const MeterConfig& c) { return std::to_string(cref(c).epochs); }});
  keys.push_back({prefix + ".lr",
                  [=](MeterConfig& c, const std::string& v) { ref(c).learning_rate = as_double(prefix + ".lr", v); },
                  [=](const MeterConfig& c) { return fmt(cref(c).learning_rate); }});
  keys.push_back({prefix + ".decay",
                  [=](MeterConfig& c, const std::string& v) { ref(c).decay = as_double(prefix + ".decay", v); },
                  [=](const MeterConfig& c) { return fmt(cref(c).decay); }});
  keys.push_back({prefix + ".batch",
                  [=](MeterConfig& c, const std::string& v) { ref(c).batch_size = as_count(prefix + ".batch", v); },
                  [=](const MeterConfig& c) { return std::to_string(cref(c).batch_size); }});
  keys.push_back({prefix + ".patience",
                  [=](MeterConfig& c, const std::string& v) { ref(c).patience = as_count(prefix + ".patience", v); },
                  [=](const MeterConfig& c) { return std::to_string(cref(c).patience); }});
  keys.push_back({prefix + ".min_delta",
                  [=](MeterConfig& c, const std::string& v) { ref(c).min_delta = as_double(prefix + ".min_delta", v); },
                  [=](const MeterConfig& c) { return fmt(cref(c).min_delta); }});
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    auto num = [&k](std::string name, auto member_ref) {
      k.push_back({name,
                   [=](MeterConfig& c, const std::string& v) { member_ref(c) = as_double(name, v); },
                   [=](const MeterConfig& c) { return fmt(member_ref(const_cast<MeterConfig&>(c))); }});
    };
    auto count = [&k](std::string name, auto member_ref) {
      k.push_back({name,
                   [=](MeterConfig& c, const std::string& v) {
                     member_ref(c) = static_cast<std::remove_reference_t<decltype(member_ref(c))>>(
                         as_count(name, v));
                   },
                   [=](const MeterConfig& c) {
                     return std::to_string(member_ref(const_cast<MeterConfig&>(c)));
                   }});
    };
    auto flag = [&k](std::string name, auto member_ref) {
      k.push_back({name,
                   [=](MeterConfig& c, const std::string& v) { member_ref(c) = as_bool(name, v); },
                   [=](const MeterConfig& c) {
                     return std::string(member_ref(const_cast<MeterConfig&>(c)) ? "true" : "false");
                   }});
    };

    count("scd.latent_dim", [](MeterConfig& c) -> std::size_t& { return c.scd.latent_dim; });
    num("scd.explained_variance", [](MeterConfig& c) -> double& { return c.scd.explained_variance; });
    k.push_back({"scd.hidden",
                 [](MeterConfig& c, const std::string& v) { c.scd.hidden = as_widths("scd.hidden", v); },
                 [](const MeterConfig& c) { return fmt_widths(c.scd.hidden); }});
    add_fit_keys(k, "scd", [](MeterConfig& c) -> FitOptions& { return c.scd.fit; },
                 [](const MeterConfig& c) -> const FitOptions& { return c.scd.fit; });
    count("scd.seed", [](MeterConfig& c) -> std::uint64_t& { return c.scd.seed; });

    count("iec.hidden", [](MeterConfig& c) -> std::size_t& { return c.iec.hidden; });
    num("iec.mu_p", [](MeterConfig& c) -> double& { return c.iec.mu_p; });
    num("iec.mu_e", [](MeterConfig& c) -> double& { return c.iec.mu_e; });
    add_fit_keys(k, "iec", [](MeterConfig& c) -> FitOptions& { return c.iec.fit; },
                 [](const MeterConfig& c) -> const FitOptions& { return c.iec.fit; });
    count("iec.seed", [](MeterConfig& c) -> std::uint64_t& { return c.iec.seed; });

    count("dsd.embed_dim", [](MeterConfig& c) -> std::size_t& { return c.dsd.embed_dim; });
    count("dsd.share_hidden", [](MeterConfig& c) -> std::size_t& { return c.dsd.share_hidden; });
    add_fit_keys(k, "dsd", [](MeterConfig& c) -> FitOptions& { return c.dsd.fit; },
                 [](const MeterConfig& c) -> const FitOptions& { return c.dsd.fit; });
    flag("dsd.joint", [](MeterConfig& c) -> bool& { return c.dsd.joint; });
    count("dsd.seed", [](MeterConfig& c) -> std::uint64_t& { return c.dsd.seed; });

    count("ous.delta_l", [](MeterConfig& c) -> std::size_t& { return c.ous.delta_l; });
    count("ous.t_max", [](MeterConfig& c) -> std::size_t& { return c.ous.t_max; });
    num("ous.mu_o_fraction", [](MeterConfig& c) -> double& { return c.ous.mu_o_fraction; });
    k.push_back({"ous.mu_o_absolute",
                 [](MeterConfig& c, const std::string& v) {
                   if (v == "none") {
                     c.ous.mu_o_absolute.reset();
                   } else {
                     c.ous.mu_o_absolute = as_double("ous.mu_o_absolute", v);
                   }
                 },
                 [](const MeterConfig& c) {
                   return c.ous.mu_o_absolute ? fmt(*c.ous.mu_o_absolute) : std::string("none");
                 }});
    num("ous.beta", [](MeterConfig& c) -> double& { return c.ous.beta; });
    count("ous.finetune_epochs", [](MeterConfig& c) -> std::size_t& { return c.ous.finetune_epochs; });

    k.push_back({"meter.mu_e",
                 [](MeterConfig& c, const std::string& v) {
                   if (v == "max") {
                     c.mu_e.reset();
                   } else {
                     c.mu_e = as_double("meter.mu_e", v);
                   }
                 },
                 [](const MeterConfig& c) { return c.mu_e ? fmt(*c.mu_e) : std::string("max"); }});
    num("meter.h_r", [](MeterConfig& c) -> double& { return c.history_ratio; });
    count("meter.seed", [](MeterConfig& c) -> std::uint64_t& { return c.seed; });
    flag("meter.use_iec", [](MeterConfig& c) -> bool& { return c.use_iec; });
    flag("meter.use_dsd", [](MeterConfig& c) -> bool& { return c.use_dsd; });
    flag("meter.use_ous", [](MeterConfig& c) -> bool& { return c.use_ous; });
    flag("meter.async", [](MeterConfig& c) -> bool& { return c.async; });
    num("meter.inject_labels", [](MeterConfig& c) -> double& { return c.inject_labels; });

    count("data.shingle", [](MeterConfig& c) -> std::size_t& { return c.shingle; });
    flag("data.standardize", [](MeterConfig& c) -> bool& { return c.standardize; });
    return k;
  }();
  return table;
}

const Key& find_key(const std::string& key) {
  for (const auto& k : key_table())
    if (k.name == key) return k;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void MeterConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (!(scd.explained_variance > 0.0 && scd.explained_variance <= 1.0))
    fail("scd.explained_variance", "must lie in (0,1]");
  if (!(iec.mu_p > 0.0 && iec.mu_p < 1.0)) fail("iec.mu_p", "must lie in (0,1)");
  if (!(iec.mu_e > 0.0)) fail("iec.mu_e", "must be positive");
  if (iec.hidden < 1) fail("iec.hidden", "must be >= 1");
  if (dsd.embed_dim < 1) fail("dsd.embed_dim", "must be >= 1");
  if (dsd.share_hidden < 1) fail("dsd.share_hidden", "must be >= 1");
  for (const auto& [name, f] : {std::pair{"scd", &scd.fit}, {"iec", &iec.fit}, {"dsd", &dsd.fit}}) {
    if (f->batch_size < 1) fail(std::string(name) + ".batch", "must be >= 1");
    if (!(f->learning_rate > 0.0)) fail(std::string(name) + ".lr", "must be positive");
    if (!(f->decay > 0.0 && f->decay <= 1.0)) fail(std::string(name) + ".decay", "must lie in (0,1]");
  }
  if (ous.delta_l < 1) fail("ous.delta_l", "must be >= 1");
  if (!(ous.mu_o_fraction > 0.0)) fail("ous.mu_o_fraction", "must be positive");
  if (ous.mu_o_absolute && !(*ous.mu_o_absolute >= 0.0)) fail("ous.mu_o_absolute", "must be >= 0");
  if (!(ous.beta >= 0.0 && ous.beta < 1.0)) fail("ous.beta", "must lie in [0,1)");
  if (mu_e && !(*mu_e >= 0.0)) fail("meter.mu_e", "must be >= 0 or 'max'");
  if (!(history_ratio > 0.0 && history_ratio < 1.0)) fail("meter.h_r", "must lie in (0,1)");
  if (!(inject_labels >= 0.0 && inject_labels <= 1.0)) fail("meter.inject_labels", "must lie in [0,1]");
}

void set_config_value(MeterConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, trim(value));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

MeterConfig parse_config(const std::string& text, MeterConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.validate();
  return base;
}

MeterConfig load_config(const std::filesystem::path& path, MeterConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::vector<std::string> apply_env_overrides(MeterConfig& config, const char* prefix) {
  std::vector<std::string> applied;
  for (const auto& k : key_table()) {
    std::string env = prefix;
    for (char c : k.name) env += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(env.c_str())) {
      k.set(config, trim(v));
      applied.push_back(k.name);
    }
  }
  config.validate();
  return applied;
}

std::string to_text(const MeterConfig& config) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const MeterConfig& config) { return fnv1a64(to_text(config)); }

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace meter
