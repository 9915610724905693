#pragma once

// Run configuration: one TOML-subset file, then TEO_* environment
// variables, then command-line flags (later sources win).
//
// Supported TOML: comments, [section] headers, and `key = value` with
// basic/literal strings, integers, floats and booleans. Every key must be
// known; anything else is rejected at load.
//
//   seed = 13
//   [text]     mode, layout, policy
//   [markers]  insert, delete, replace, none, cls, sep
//   [perturb]  prob_p, prob_r, max_span_len
//   [stage1] / [stage2]  kind, endpoint, timeout_ms, retries, backoff_ms
//   [metrics]  bleu_max_order, rouge_max_order, restoration_max_order
//   [engine]   concurrency
//   [paths]    prepared, predictions, report
//
// The environment name of a key is TEO_<SECTION>_<KEY> upper-cased, or
// TEO_<KEY> for top-level keys (TEO_SEED, TEO_PERTURB_PROB_P, ...).

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "teo/backend.hpp"
#include "teo/corpus.hpp"
#include "teo/editscript.hpp"
#include "teo/metrics.hpp"
#include "teo/perturb.hpp"

namespace teo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputPaths {
  std::string prepared;
  std::string predictions;
  std::string report;

  bool operator==(const OutputPaths&) const = default;
};

struct Config {
  TextOptions text;
  Policy policy = Policy::STRICT;
  PerturbConfig perturb;  // perturb.seed doubles as the run seed
  BackendSpec stage1;
  BackendSpec stage2;
  MetricOrders orders;
  std::size_t concurrency = 4;
  OutputPaths paths;

  std::uint64_t seed() const { return perturb.seed; }

  void validate() const {
    try {
      perturb.validate();
      stage1.validate();
      stage2.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (orders.bleu == 0 || orders.rouge == 0 || orders.restoration == 0)
      throw ConfigError("metric orders must be >= 1");
    if (concurrency == 0) throw ConfigError("engine.concurrency must be >= 1");
    const auto& m = text.markers;
    for (const auto* lit : {&m.insert, &m.remove, &m.replace, &m.none, &m.cls, &m.sep})
      if (lit->empty() || lit->front() != '[')
        throw ConfigError("marker literals must be non-empty and start with '[': \"" + *lit + "\"");
  }

  nlohmann::json to_json() const {
    const auto& m = text.markers;
    return {{"seed", perturb.seed},
            {"text", {{"mode", to_string(text.mode)},
                      {"layout", to_string(text.layout)},
                      {"policy", policy == Policy::STRICT ? "strict" : "lenient"}}},
            {"markers", {{"insert", m.insert}, {"delete", m.remove}, {"replace", m.replace},
                         {"none", m.none}, {"cls", m.cls}, {"sep", m.sep}}},
            {"perturb", {{"prob_p", perturb.prob_p}, {"prob_r", perturb.prob_r},
                         {"max_span_len", perturb.max_span_len}}},
            {"stage1", stage1.to_json()},
            {"stage2", stage2.to_json()},
            {"metrics", {{"bleu_max_order", orders.bleu}, {"rouge_max_order", orders.rouge},
                         {"restoration_max_order", orders.restoration}}},
            {"engine", {{"concurrency", concurrency}}},
            {"paths", {{"prepared", paths.prepared}, {"predictions", paths.predictions},
                       {"report", paths.report}}}};
  }
};

namespace detail {

// A config value: typed when it came from the TOML file, raw text when it
// came from the environment.
struct Scalar {
  std::variant<std::string, long long, double, bool> value;
  bool raw = false;
  std::string where;

  [[noreturn]] void bad(const char* expected) const {
    throw ConfigError(where + ": expected " + expected);
  }

  std::string as_string() const {
    if (auto s = std::get_if<std::string>(&value)) return *s;
    bad("a string");
  }

  long long as_int() const {
    if (auto i = std::get_if<long long>(&value)) return *i;
    if (raw) {
      const auto& s = std::get<std::string>(value);
      std::size_t used = 0;
      try {
        const long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
      } catch (const std::exception&) {
      }
    }
    bad("an integer");
  }

  std::size_t as_count() const {
    const long long v = as_int();
    if (v < 0) bad("a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  double as_double() const {
    if (auto d = std::get_if<double>(&value)) return *d;
    if (auto i = std::get_if<long long>(&value)) return static_cast<double>(*i);
    if (raw) {
      const auto& s = std::get<std::string>(value);
      std::size_t used = 0;
      try {
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
      } catch (const std::exception&) {
      }
    }
    bad("a number");
  }

  bool as_bool() const {
    if (auto b = std::get_if<bool>(&value)) return *b;
    if (raw) {
      const auto& s = std::get<std::string>(value);
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
    }
    bad("a boolean");
  }
};

using Setter = std::function<void(Config&, const Scalar&)>;

struct KeySpec {
  std::string section;  // empty for top level
  std::string key;
  Setter set;
};

template <typename Parse>
auto enum_setter(Parse parse) {
  return [parse](const Scalar& v) {
    try {
      return parse(v.as_string());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(v.where + ": " + e.what());
    }
  };
}

inline void add_backend_keys(std::vector<KeySpec>& keys, const std::string& section,
                             BackendSpec Config::*member) {
  keys.push_back({section, "kind", [member](Config& c, const Scalar& v) {
                    (c.*member).kind = enum_setter(parse_backend_kind)(v);
                  }});
  keys.push_back({section, "endpoint", [member](Config& c, const Scalar& v) {
                    (c.*member).endpoint = v.as_string();
                  }});
  keys.push_back({section, "timeout_ms", [member](Config& c, const Scalar& v) {
                    (c.*member).timeout = std::chrono::milliseconds(v.as_int());
                  }});
  keys.push_back({section, "retries", [member](Config& c, const Scalar& v) {
                    (c.*member).retries = static_cast<unsigned>(v.as_count());
                  }});
  keys.push_back({section, "backoff_ms", [member](Config& c, const Scalar& v) {
                    (c.*member).backoff = std::chrono::milliseconds(v.as_count());
                  }});
}

inline const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    k.push_back({"", "seed", [](Config& c, const Scalar& v) {
                   c.perturb.seed = static_cast<std::uint64_t>(v.as_int());
                 }});
    k.push_back({"text", "mode", [](Config& c, const Scalar& v) {
                   c.text.mode = enum_setter(parse_token_mode)(v);
                 }});
    k.push_back({"text", "layout", [](Config& c, const Scalar& v) {
                   c.text.layout = enum_setter(parse_layout)(v);
                 }});
    k.push_back({"text", "policy", [](Config& c, const Scalar& v) {
                   const auto s = v.as_string();
                   if (s != "strict" && s != "lenient") throw ConfigError(v.where + ": policy must be strict or lenient");
                   c.policy = s == "strict" ? Policy::STRICT : Policy::LENIENT;
                 }});
    k.push_back({"markers", "insert", [](Config& c, const Scalar& v) { c.text.markers.insert = v.as_string(); }});
    k.push_back({"markers", "delete", [](Config& c, const Scalar& v) { c.text.markers.remove = v.as_string(); }});
    k.push_back({"markers", "replace", [](Config& c, const Scalar& v) { c.text.markers.replace = v.as_string(); }});
    k.push_back({"markers", "none", [](Config& c, const Scalar& v) { c.text.markers.none = v.as_string(); }});
    k.push_back({"markers", "cls", [](Config& c, const Scalar& v) { c.text.markers.cls = v.as_string(); }});
    k.push_back({"markers", "sep", [](Config& c, const Scalar& v) { c.text.markers.sep = v.as_string(); }});
    k.push_back({"perturb", "prob_p", [](Config& c, const Scalar& v) { c.perturb.prob_p = v.as_double(); }});
    k.push_back({"perturb", "prob_r", [](Config& c, const Scalar& v) { c.perturb.prob_r = v.as_double(); }});
    k.push_back({"perturb", "max_span_len",
                 [](Config& c, const Scalar& v) { c.perturb.max_span_len = v.as_count(); }});
    add_backend_keys(k, "stage1", &Config::stage1);
    add_backend_keys(k, "stage2", &Config::stage2);
    k.push_back({"metrics", "bleu_max_order", [](Config& c, const Scalar& v) { c.orders.bleu = v.as_count(); }});
    k.push_back({"metrics", "rouge_max_order", [](Config& c, const Scalar& v) { c.orders.rouge = v.as_count(); }});
    k.push_back({"metrics", "restoration_max_order",
                 [](Config& c, const Scalar& v) { c.orders.restoration = v.as_count(); }});
    k.push_back({"engine", "concurrency", [](Config& c, const Scalar& v) {
                   c.concurrency = v.as_count();
                   c.stage1.concurrency = c.stage2.concurrency = c.concurrency;
                 }});
    k.push_back({"paths", "prepared", [](Config& c, const Scalar& v) { c.paths.prepared = v.as_string(); }});
    k.push_back({"paths", "predictions", [](Config& c, const Scalar& v) { c.paths.predictions = v.as_string(); }});
    k.push_back({"paths", "report", [](Config& c, const Scalar& v) { c.paths.report = v.as_string(); }});
    return k;
  }();
  return keys;
}

inline const KeySpec* find_key(std::string_view section, std::string_view key) {
  for (const auto& k : known_keys())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment outside of quotes.
inline std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

inline Scalar parse_value(const std::string& text, const std::string& where) {
  Scalar s;
  s.where = where;
  if (text.size() >= 2 && text.front() == '\'' && text.back() == '\'') {
    s.value = text.substr(1, text.size() - 2);
    return s;
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    // Basic strings share JSON's escape rules for the subset supported here.
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_string()) throw ConfigError(where + ": malformed string");
    s.value = j.get<std::string>();
    return s;
  }
  if (text == "true" || text == "false") {
    s.value = text == "true";
    return s;
  }
  std::string digits;
  for (char c : text)
    if (c != '_') digits.push_back(c);
  try {
    std::size_t used = 0;
    if (digits.find_first_of(".eE") == std::string::npos) {
      const long long v = std::stoll(digits, &used);
      if (used == digits.size()) {
        s.value = v;
        return s;
      }
    } else {
      const double v = std::stod(digits, &used);
      if (used == digits.size()) {
        s.value = v;
        return s;
      }
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": unsupported value \"" + text + "\"");
}

}  // namespace detail

/// Applies a TOML-subset document on top of `cfg`.
inline void apply_toml(Config& cfg, std::istream& in, const std::string& name = "config") {
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto text = detail::trim(detail::strip_comment(line));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where + ": malformed section header");
      section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
      bool known = false;
      for (const auto& k : detail::known_keys()) known = known || k.section == section;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = detail::trim(std::string_view(text).substr(0, eq));
    const auto* spec = detail::find_key(section, key);
    if (!spec)
      throw ConfigError(where + ": unknown key \"" + (section.empty() ? key : section + "." + key) + "\"");
    spec->set(cfg, detail::parse_value(detail::trim(std::string_view(text).substr(eq + 1)), where));
  }
}

inline void apply_toml_file(Config& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  apply_toml(cfg, in, path);
}

inline std::string env_name(const std::string& section, const std::string& key) {
  std::string out = "TEO_";
  for (char c : section.empty() ? key : section + "_" + key)
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

/// Applies TEO_* overrides found through `getenv`.
inline void apply_env(Config& cfg, const std::function<const char*(const char*)>& getenv = ::getenv) {
  for (const auto& k : detail::known_keys()) {
    const auto name = env_name(k.section, k.key);
    if (const char* v = getenv(name.c_str())) {
      detail::Scalar s;
      s.value = std::string(v);
      s.raw = true;
      s.where = name;
      k.set(cfg, s);
    }
  }
}

}  // namespace teo
