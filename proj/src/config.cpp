#include "flowchain/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "flowchain/experiments.hpp"

namespace flowchain::cli {

using nlohmann::json;

std::string_view value_type_name(ValueType t) {
  switch (t) {
    case ValueType::number:
      return "number";
    case ValueType::integer:
      return "integer";
    case ValueType::u64:
      return "unsigned 64-bit integer";
    case ValueType::string:
      return "string";
    case ValueType::number_list:
      return "array of numbers";
  }
  return "unknown";
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> cmds{"bounds", "rates", "simulate", "experiment", "grr-check"};
  return cmds;
}

namespace {

using Defaults = std::vector<std::pair<std::string, json>>;

Defaults for_all(const json& v) {
  Defaults d;
  for (const auto& c : commands()) d.emplace_back(c, v);
  return d;
}

std::vector<KeySpec> build_schema() {
  const json none;  // null: optional without default
  const json empty_list = json::array();
  const std::string B = "bounds", R = "rates", S = "simulate", E = "experiment", G = "grr-check";
  std::vector<KeySpec> s;
  const auto add = [&](std::string key, ValueType type, std::string help, Defaults defaults,
                       std::vector<std::string> choices = {}, bool required = false) {
    KeySpec k;
    k.key = std::move(key);
    k.type = type;
    k.help = std::move(help);
    k.defaults = std::move(defaults);
    k.choices = std::move(choices);
    k.required = required;
    s.push_back(std::move(k));
  };
  add("cmd", ValueType::string, "subcommand", for_all(none), commands());
  add("seed", ValueType::u64, "64-bit random seed", for_all(0));
  add("workers", ValueType::integer, "worker threads (default FLOWCHAIN_WORKERS or all cores)",
      for_all(none));
  add("out", ValueType::string, "output directory for report.json and report.csv", for_all("."));

  add("op", ValueType::string,
      "bounds: all|kolmogorov|basic|lt|exponent|entropy; rates: I|I_homeo|lambda0|gamma0|K|K_homeo|"
      "K_negative|one_point|schilder|laplace|range_density|range_tail|bump_rate|diff_flow_rate|"
      "diff_flow|diff_flow_opt",
      {{B, "all"}, {R, none}}, {}, true);
  add("lambda", ValueType::number, "drift exponent Lambda", {{B, 0.0}, {R, 0.0}, {S, 0.0}, {E, 0.0}});
  add("sigma", ValueType::number, "volatility sigma (> 0)", {{B, 1.0}, {R, 1.0}, {S, 1.0}, {E, 1.0}});
  add("cbar", ValueType::number, "moment constant cbar (>= 1)", {{B, 2.0}, {R, 2.0}, {S, 2.0}, {E, 2.0}});
  add("d", ValueType::integer, "spatial dimension", {{B, 1}, {R, 1}, {S, 1}, {E, 1}});
  add("gamma", ValueType::number, "cube side exponent: side = exp(-gamma T)",
      {{B, 2.0}, {R, 2.0}, {S, 2.0}, {E, 2.0}});
  add("T", ValueType::number, "time horizon", {{B, 1.0}, {R, 1.0}, {S, 1.0}, {E, 1.0}});
  add("u", ValueType::number, "diameter threshold (range_tail: tail point)", {{B, 1.0}, {R, 1.0}, {E, 1.0}});
  add("q", ValueType::number, "moment order (bounds: 0 optimises q)", {{B, 0.0}, {E, 2.0}, {G, 4.0}});
  add("side", ValueType::number, "cube side for op=entropy", {{B, 1.0}});
  add("rel_tol", ValueType::number, "relative tolerance of the numeric entropy integral", {{B, 1e-8}});

  add("delta", ValueType::number, "box dimension of the compact set (0 means d)", {{R, 0.0}, {E, 0.0}});
  add("A", ValueType::number, "diffusion bound A", {{R, 1.0}, {E, 1.0}});
  add("B", ValueType::number, "radial drift bound B", {{R, 0.0}, {E, 0.0}});
  add("k", ValueType::number, "linear growth level k", {{R, 1.0}});
  add("Btilde", ValueType::number, "drift offset of the Schilder constraint", {{R, 0.0}});
  add("xi", ValueType::number, "growth exponent xi", {{R, 1.0}});
  add("z", ValueType::number, "crossing scale z", {{R, 10.0}});
  add("eps", ValueType::number, "distance floor eps", {{R, 1e-4}});
  add("u_hat", ValueType::number, "initial-distance scale u_hat", {{R, 1.0}});
  add("s", ValueType::number, "Laplace variable", {{R, 1.0}});
  add("r", ValueType::number, "range density argument", {{R, 1.0}});

  add("model", ValueType::string, "flow model", {{S, "linear"}, {E, "linear"}}, {"linear", "bump", "sde"});
  add("kind", ValueType::string, "experiment kind", {{E, "compare"}},
      {"tail", "rate", "compare", "dispersion", "moment"});
  add("paths", ValueType::u64, "number of Monte Carlo paths", {{S, 10}, {E, 100000}, {G, 100}});
  add("steps", ValueType::integer, "time steps per path", {{S, 256}, {E, 256}});
  add("sup_mode", ValueType::string, "running supremum: exact bridge or time grid",
      {{S, "bridge"}, {E, "bridge"}}, {"bridge", "grid"});
  add("bump_spacing", ValueType::number, "bump lattice spacing (0: exp(-(lambda + sigma^2 d) T))",
      {{S, 0.0}, {E, 0.0}});
  add("sde_model", ValueType::string, "built-in SDE", {{S, "sine"}, {E, "sine"}}, {"sine", "tanh"});
  add("points", ValueType::number_list, "SDE initial points (default {0, exp(-gamma T)})", {{S, empty_list}});
  add("level", ValueType::number, "confidence level", {{E, 0.99}});
  add("horizons", ValueType::number_list, "T grid (rate: required; compare: default {T})", {{E, empty_list}});
  add("gammas", ValueType::number_list, "gamma grid for compare (default {gamma})", {{E, empty_list}});
  add("thresholds", ValueType::number_list, "u grid for compare (default {u})", {{E, empty_list}});
  add("kappa", ValueType::number, "escape slope for dispersion (0 selects K)", {{E, 0.0}});
  add("radii", ValueType::number_list, "pair distances for moment (default depends on model)",
      {{E, empty_list}});
  add("anchors", ValueType::integer, "pair anchors for moment", {{E, 4}});

  add("field", ValueType::string, "audited field", {{G, "brownian"}}, {"brownian", "linear", "constant"});
  add("grid", ValueType::integer, "grid points on [0, 1]", {{G, 256}});
  add("alpha", ValueType::number, "gauge exponent p(s) = s^alpha", {{G, 1.0}});
  add("slope", ValueType::number, "slope of the linear field", {{G, 1.0}});
  return s;
}

json check_type(const KeySpec& spec, const json& v) {
  const auto fail = [&]() -> json {
    throw ConfigError("config key '" + spec.key + "': expected " + std::string(value_type_name(spec.type)) +
                      ", got " + v.dump());
  };
  switch (spec.type) {
    case ValueType::number:
      if (!v.is_number()) return fail();
      if (!std::isfinite(v.get<double>())) return fail();
      return v.get<double>();
    case ValueType::integer: {
      if (!v.is_number()) return fail();
      if (v.is_number_integer()) return v.get<long long>();
      const double x = v.get<double>();
      if (std::floor(x) != x || std::abs(x) > 9.0e15) return fail();
      return static_cast<long long>(x);
    }
    case ValueType::u64:
      if (v.is_number_unsigned()) return v.get<std::uint64_t>();
      if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
      return fail();
    case ValueType::string:
      if (!v.is_string()) return fail();
      if (!spec.choices.empty() &&
          std::find(spec.choices.begin(), spec.choices.end(), v.get<std::string>()) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
        throw ConfigError("config key '" + spec.key + "': '" + v.get<std::string>() + "' is not one of " + list);
      }
      return v;
    case ValueType::number_list: {
      if (!v.is_array()) return fail();
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) return fail();
        out.push_back(e.get<double>());
      }
      return out;
    }
  }
  return fail();
}

void check_ranges(const RunConfig& c) {
  const auto positive = [&](const char* key, const char* why) {
    if (c.has(key) && !(c.number(key) > 0.0)) {
      throw ConfigError(std::string("config key '") + key + "' must be > 0" + why);
    }
  };
  positive("sigma", ": every rate formula divides by sigma^2, so sigma = 0 has no finite rate");
  positive("T", "");
  if (c.has("d") && c.integer("d") < 1) throw ConfigError("config key 'd' must be >= 1");
  if (c.has("paths") && c.params.at("paths").get<std::uint64_t>() == 0) {
    throw ConfigError("config key 'paths' must be >= 1");
  }
  if (c.has("steps") && c.integer("steps") < 1) throw ConfigError("config key 'steps' must be >= 1");
  if (c.has("grid") && c.integer("grid") < 2) throw ConfigError("config key 'grid' must be >= 2");
  if (c.has("anchors") && c.integer("anchors") < 1) throw ConfigError("config key 'anchors' must be >= 1");
  if (c.has("cbar") && !(c.number("cbar") >= 1.0)) throw ConfigError("config key 'cbar' must be >= 1");
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = build_schema();
  return s;
}

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : schema()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

bool key_applies(const KeySpec& spec, std::string_view cmd) {
  return std::any_of(spec.defaults.begin(), spec.defaults.end(),
                     [&](const auto& d) { return d.first == cmd; });
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest_key(std::string_view key) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& k : schema()) {
    const std::size_t d = edit_distance(key, k.key);
    if (d < best_d) {
      best_d = d;
      best = k.key;
    }
  }
  return best;
}

bool RunConfig::has(std::string_view key) const {
  const auto it = params.find(std::string(key));
  return it != params.end() && !it->is_null();
}

double RunConfig::number(std::string_view key) const {
  if (!has(key)) throw ConfigError("config key '" + std::string(key) + "' is not set");
  return params.at(std::string(key)).get<double>();
}

long long RunConfig::integer(std::string_view key) const {
  if (!has(key)) throw ConfigError("config key '" + std::string(key) + "' is not set");
  return params.at(std::string(key)).get<long long>();
}

std::string RunConfig::string(std::string_view key) const {
  if (!has(key)) throw ConfigError("config key '" + std::string(key) + "' is not set");
  return params.at(std::string(key)).get<std::string>();
}

std::vector<double> RunConfig::list(std::string_view key) const {
  if (!has(key)) return {};
  return params.at(std::string(key)).get<std::vector<double>>();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(params.dump())));
  return buf;
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (find_key(it.key()) == nullptr) {
      const std::string hint = suggest_key(it.key());
      throw ConfigError("unknown config key '" + it.key() + "'" +
                        (hint.empty() ? std::string() : " (did you mean '" + hint + "'?)"));
    }
  }
  if (!doc.contains("cmd")) throw ConfigError("config key 'cmd' is required");
  RunConfig c;
  c.cmd = check_type(*find_key("cmd"), doc.at("cmd")).get<std::string>();
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!key_applies(*find_key(it.key()), c.cmd)) {
      throw ConfigError("config key '" + it.key() + "' does not apply to cmd '" + c.cmd + "'");
    }
  }
  for (const auto& k : schema()) {
    if (k.key == "workers" || k.key == "out") continue;
    const auto def = std::find_if(k.defaults.begin(), k.defaults.end(),
                                  [&](const auto& d) { return d.first == c.cmd; });
    if (def == k.defaults.end()) continue;
    if (doc.contains(k.key) && !doc.at(k.key).is_null()) {
      c.params[k.key] = check_type(k, doc.at(k.key));
    } else if (!def->second.is_null()) {
      c.params[k.key] = def->second;
    } else if (k.required) {
      throw ConfigError("config key '" + k.key + "' is required for cmd '" + c.cmd + "'");
    }
  }
  c.params["cmd"] = c.cmd;
  c.seed = c.params.at("seed").get<std::uint64_t>();
  if (doc.contains("workers") && !doc.at("workers").is_null()) {
    const long long w = check_type(*find_key("workers"), doc.at("workers")).get<long long>();
    if (w < 1 || w > 4096) throw ConfigError("config key 'workers' must lie in [1, 4096]");
    c.workers = static_cast<unsigned>(w);
  } else {
    try {
      c.workers = experiments::default_workers();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (doc.contains("out") && !doc.at("out").is_null()) {
    c.out = check_type(*find_key("out"), doc.at("out")).get<std::string>();
  }
  check_ranges(c);
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json value_from_text(const KeySpec& spec, const std::string& text) {
  const auto fail = [&]() -> json {
    throw ConfigError("flag --" + spec.key + ": expected " + std::string(value_type_name(spec.type)) +
                      ", got '" + text + "'");
  };
  const auto parse_double = [&](const std::string& t) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) fail();
    return v;
  };
  switch (spec.type) {
    case ValueType::number:
      return parse_double(text);
    case ValueType::integer: {
      char* end = nullptr;
      errno = 0;
      const long long v = std::strtoll(text.c_str(), &end, 10);
      if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) return fail();
      return v;
    }
    case ValueType::u64: {
      if (text.empty() || text[0] == '-') return fail();
      char* end = nullptr;
      errno = 0;
      const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
      if (end != text.c_str() + text.size() || errno == ERANGE) return fail();
      return static_cast<std::uint64_t>(v);
    }
    case ValueType::string:
      return text;
    case ValueType::number_list: {
      json out = json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        out.push_back(parse_double(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return out;
    }
  }
  return fail();
}

}  // namespace flowchain::cli
