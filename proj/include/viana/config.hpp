#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "viana/errors.hpp"
#include "viana/stats.hpp"

namespace viana {

struct SystemSection {
  int d = 16;
  double a0 = kNaN;  // NaN: Misiurewicz parameter of kneading (4, 1)
  double alpha = 1e-3;
  std::string mode = "skew";
  double perturbation = 0.0;
};

struct RunSection {
  std::uint64_t seed = 20240601;
  std::size_t threads = 0;
  std::string out_dir = "out";
  std::string preset = "small";
};

struct ConstantsSection {
  std::size_t c0_seeds = 200;
  std::size_t lyapunov_N = 100000;
  double gamma = 0.05;
  std::size_t recurrence_N = 100000;
  double b = 0.25;
  double r = kNaN;      // NaN: c0 / 2
  double sigma = kNaN;  // NaN: exp(-c0 / 6)
  std::size_t delta1_orbits = 10;
  std::size_t delta1_N = 500;
  std::size_t delta1_pairs = 100;
  std::size_t density_orbits = 20;
  std::size_t density_N = 500;
  double tau_eps = 0.05;
  std::size_t tau_centers = 10;
};

struct SimulateSection {
  std::size_t orbits = 4;
  std::size_t N = 20000;
};

struct LyapunovSection {
  std::size_t seeds = 20;
  std::size_t N = 100000;
};

struct HyptimesSection {
  std::size_t orbits = 20;
  std::size_t N = 500;
  std::size_t times = 50;
  std::size_t pairs = 2;
};

struct DecomposeSection {
  std::size_t segments = 200;
  std::size_t n_max = 200;
  std::size_t lemma_pairs = 100;
  std::size_t lemma_length = 30;
};

struct PressureSection {
  double eps = 0.05;
  int n_lo = 8;
  int n_hi = 16;
  std::size_t end_points = 2048;
  std::size_t digit_samples = 1;
};

struct BowenSection {
  double amplitude = 0.1;
  double eps = 0.05;
  std::size_t segments = 100;
  std::size_t n_max = 80;
  std::size_t companions = 20;
};

struct GlueSection {
  std::size_t pairs = 50;
  std::size_t max_length = 20;
  double eps = 0.05;
  int max_gap = 20;
};

struct ExpansivitySection {
  std::size_t seeds = 50;
  std::size_t N = 10000;
  std::vector<double> eps_list{0.2, 0.05, 0.01, 1e-3};
  std::size_t companions = 8;
  std::size_t times = 8;
};

struct LdpSection {
  std::size_t seeds = 20000;
  std::vector<double> n_grid{10, 20, 30, 40};
  double tolerance = 0.1;
  double psi_floor = -4.0;
};

struct ExperimentConfig {
  SystemSection system;
  RunSection run;
  ConstantsSection constants;
  SimulateSection simulate;
  LyapunovSection lyapunov;
  HyptimesSection hyptimes;
  DecomposeSection decompose;
  PressureSection pressure;
  BowenSection bowen;
  GlueSection glue;
  ExpansivitySection expansivity;
  LdpSection ldp;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline double parse_real(const std::string& key, const std::string& v) {
  if (v == "nan" || v == "auto" || v == "\"auto\"") return kNaN;
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline std::string parse_string(const std::string& key, const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  for (char c : v) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/')) {
      throw ConfigError(key + ": expected a string, got '" + v + "'");
    }
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& key, std::string v) {
  v = trim(v);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ConfigError(key + ": expected a list [a, b, ...]");
  std::vector<double> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_real(key, item));
  }
  return out;
}

inline std::string fmt_real(double x) {
  if (std::isnan(x)) return "\"auto\"";
  for (int p : {15, 17}) {
    std::ostringstream os;
    os.precision(p);
    os << x;
    if (p == 17 || std::stod(os.str()) == x) return os.str();
  }
  return "";
}

}  // namespace detail

// One entry per config key: "section.key" with a parser and a printer.
struct ConfigKey {
  std::string path;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto real = [&k](std::string path, auto member) {
      k.push_back({path, [=](ExperimentConfig& c, const std::string& v) { member(c) = detail::parse_real(path, v); },
                   [=](const ExperimentConfig& c) { return detail::fmt_real(member(const_cast<ExperimentConfig&>(c))); }});
    };
    auto uint = [&k](std::string path, auto member) {
      k.push_back({path,
                   [=](ExperimentConfig& c, const std::string& v) {
                     member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(detail::parse_uint(path, v));
                   },
                   [=](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); }});
    };
    auto str = [&k](std::string path, auto member) {
      k.push_back({path, [=](ExperimentConfig& c, const std::string& v) { member(c) = detail::parse_string(path, v); },
                   [=](const ExperimentConfig& c) { return "\"" + member(const_cast<ExperimentConfig&>(c)) + "\""; }});
    };
    auto list = [&k](std::string path, auto member) {
      k.push_back({path, [=](ExperimentConfig& c, const std::string& v) { member(c) = detail::parse_list(path, v); },
                   [=](const ExperimentConfig& c) {
                     std::string s = "[";
                     const auto& l = member(const_cast<ExperimentConfig&>(c));
                     for (std::size_t i = 0; i < l.size(); ++i) s += (i ? ", " : "") + detail::fmt_real(l[i]);
                     return s + "]";
                   }});
    };
    auto integer = [&k](std::string path, auto member) {
      k.push_back({path,
                   [=](ExperimentConfig& c, const std::string& v) {
                     const double x = detail::parse_real(path, v);
                     if (x != std::floor(x)) throw ConfigError(path + ": expected an integer, got '" + v + "'");
                     member(c) = static_cast<int>(x);
                   },
                   [=](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); }});
    };
#define VIANA_M(expr) [](ExperimentConfig& c) -> auto& { return c.expr; }
    integer("system.d", VIANA_M(system.d));
    real("system.a0", VIANA_M(system.a0));
    real("system.alpha", VIANA_M(system.alpha));
    str("system.mode", VIANA_M(system.mode));
    real("system.perturbation", VIANA_M(system.perturbation));
    uint("run.seed", VIANA_M(run.seed));
    uint("run.threads", VIANA_M(run.threads));
    str("run.out_dir", VIANA_M(run.out_dir));
    str("run.preset", VIANA_M(run.preset));
    uint("constants.c0_seeds", VIANA_M(constants.c0_seeds));
    uint("constants.lyapunov_N", VIANA_M(constants.lyapunov_N));
    real("constants.gamma", VIANA_M(constants.gamma));
    uint("constants.recurrence_N", VIANA_M(constants.recurrence_N));
    real("constants.b", VIANA_M(constants.b));
    real("constants.r", VIANA_M(constants.r));
    real("constants.sigma", VIANA_M(constants.sigma));
    uint("constants.delta1_orbits", VIANA_M(constants.delta1_orbits));
    uint("constants.delta1_N", VIANA_M(constants.delta1_N));
    uint("constants.delta1_pairs", VIANA_M(constants.delta1_pairs));
    uint("constants.density_orbits", VIANA_M(constants.density_orbits));
    uint("constants.density_N", VIANA_M(constants.density_N));
    real("constants.tau_eps", VIANA_M(constants.tau_eps));
    uint("constants.tau_centers", VIANA_M(constants.tau_centers));
    uint("simulate.orbits", VIANA_M(simulate.orbits));
    uint("simulate.N", VIANA_M(simulate.N));
    uint("lyapunov.seeds", VIANA_M(lyapunov.seeds));
    uint("lyapunov.N", VIANA_M(lyapunov.N));
    uint("hyptimes.orbits", VIANA_M(hyptimes.orbits));
    uint("hyptimes.N", VIANA_M(hyptimes.N));
    uint("hyptimes.times", VIANA_M(hyptimes.times));
    uint("hyptimes.pairs", VIANA_M(hyptimes.pairs));
    uint("decompose.segments", VIANA_M(decompose.segments));
    uint("decompose.n_max", VIANA_M(decompose.n_max));
    uint("decompose.lemma_pairs", VIANA_M(decompose.lemma_pairs));
    uint("decompose.lemma_length", VIANA_M(decompose.lemma_length));
    real("pressure.eps", VIANA_M(pressure.eps));
    integer("pressure.n_lo", VIANA_M(pressure.n_lo));
    integer("pressure.n_hi", VIANA_M(pressure.n_hi));
    uint("pressure.end_points", VIANA_M(pressure.end_points));
    uint("pressure.digit_samples", VIANA_M(pressure.digit_samples));
    real("bowen.amplitude", VIANA_M(bowen.amplitude));
    real("bowen.eps", VIANA_M(bowen.eps));
    uint("bowen.segments", VIANA_M(bowen.segments));
    uint("bowen.n_max", VIANA_M(bowen.n_max));
    uint("bowen.companions", VIANA_M(bowen.companions));
    uint("glue.pairs", VIANA_M(glue.pairs));
    uint("glue.max_length", VIANA_M(glue.max_length));
    real("glue.eps", VIANA_M(glue.eps));
    integer("glue.max_gap", VIANA_M(glue.max_gap));
    uint("expansivity.seeds", VIANA_M(expansivity.seeds));
    uint("expansivity.N", VIANA_M(expansivity.N));
    list("expansivity.eps_list", VIANA_M(expansivity.eps_list));
    uint("expansivity.companions", VIANA_M(expansivity.companions));
    uint("expansivity.times", VIANA_M(expansivity.times));
    uint("ldp.seeds", VIANA_M(ldp.seeds));
    list("ldp.n_grid", VIANA_M(ldp.n_grid));
    real("ldp.tolerance", VIANA_M(ldp.tolerance));
    real("ldp.psi_floor", VIANA_M(ldp.psi_floor));
#undef VIANA_M
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_key(const std::string& path) {
  for (const auto& k : config_schema()) {
    if (k.path == path) return &k;
  }
  return nullptr;
}

inline void set_key(ExperimentConfig& c, const std::string& path, const std::string& value) {
  const auto* k = find_key(path);
  if (!k) throw ConfigError(path + ": unknown key");
  k->set(c, detail::trim(value));
}

// Presets scale every horizon; "paper" matches the acceptance scale.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.run.preset = name;
  if (name == "paper") return c;
  if (name != "small") throw ConfigError("run.preset: unknown preset '" + name + "' (expected small or paper)");
  c.constants.c0_seeds = 40;
  c.constants.lyapunov_N = 20000;
  c.constants.recurrence_N = 20000;
  c.constants.density_orbits = 10;
  c.constants.tau_centers = 3;
  c.simulate.N = 5000;
  c.lyapunov.seeds = 8;
  c.lyapunov.N = 20000;
  c.hyptimes.orbits = 8;
  c.decompose.segments = 100;
  c.decompose.lemma_pairs = 40;
  c.pressure.end_points = 1024;
  c.bowen.segments = 40;
  c.glue.pairs = 10;
  c.expansivity.seeds = 10;
  c.expansivity.N = 2000;
  c.ldp.seeds = 5000;
  return c;
}

// TOML subset: [section] headers, key = value lines, # comments; values are
// numbers, bare or quoted strings, and flat numeric lists.
inline void apply_toml(ExperimentConfig& c, std::istream& in, const std::string& origin = "config") {
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string path = section.empty() ? key : section + "." + key;
    set_key(c, path, line.substr(eq + 1));
  }
}

inline std::string env_name(const std::string& path) {
  std::string s = "VIANA_";
  for (char ch : path) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// VIANA_SECTION_KEY overrides section.key.
inline void apply_env(ExperimentConfig& c) {
  for (const auto& k : config_schema()) {
    if (const char* v = std::getenv(env_name(k.path).c_str())) k.set(c, detail::trim(v));
  }
}

// Preset named in the file (or `preset`), then file values, then environment.
inline ExperimentConfig load_config(const std::string& path, const std::string& preset = "") {
  std::string text;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  std::string chosen = preset;
  if (chosen.empty()) {
    ExperimentConfig probe;
    std::istringstream in(text);
    apply_toml(probe, in, path);
    if (const char* v = std::getenv("VIANA_RUN_PRESET")) probe.run.preset = detail::trim(v);
    chosen = probe.run.preset;
  }
  ExperimentConfig c = preset_config(chosen);
  std::istringstream in(text);
  apply_toml(c, in, path);
  apply_env(c);
  c.run.preset = chosen;
  return c;
}

inline std::string to_toml(const ExperimentConfig& c) {
  std::string out, section;
  for (const auto& k : config_schema()) {
    const auto dot = k.path.find('.');
    const std::string s = k.path.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += k.path.substr(dot + 1) + " = " + k.get(c) + "\n";
  }
  return out;
}

struct ConfigViolation {
  std::string key;
  std::string message;
  std::string reason;  // the hypothesis the value would break
};

// Range and cross-key checks.  `c0` enables the r <= c0/2 check when the
// pressure-gap experiment is requested.
inline std::vector<ConfigViolation> validate_config(const ExperimentConfig& c, bool gap_requested = false,
                                                    double c0 = kNaN) {
  std::vector<ConfigViolation> v;
  auto bad = [&v](std::string key, std::string msg, std::string why) { v.push_back({key, msg, why}); };
  if (c.system.d < 2) bad("system.d", "must be >= 2", "the base map theta -> d theta needs an integer d >= 2");
  if (!std::isnan(c.system.a0) && !(c.system.a0 > 1.0 && c.system.a0 < 2.0)) {
    bad("system.a0", "must lie in the open interval (1, 2)", "map definition: a0 is a Misiurewicz parameter in (1, 2)");
  }
  if (!(c.system.alpha >= 0.0)) bad("system.alpha", "must be >= 0", "map definition: alpha is a nonnegative coupling");
  if (c.system.mode != "skew" && c.system.mode != "perturbed") {
    bad("system.mode", "must be skew or perturbed", "only the skew product and its C^3 perturbations are defined");
  }
  if (c.system.mode == "perturbed" && !(c.system.perturbation >= 0.0)) {
    bad("system.perturbation", "must be >= 0", "perturbation size is a C^3 norm");
  }
  if (!std::isnan(c.constants.sigma) && !(c.constants.sigma > 0.0 && c.constants.sigma < 1.0)) {
    bad("constants.sigma", "must lie in (0, 1)", "hyperbolic times need a contraction rate sigma < 1");
  }
  if (!(c.constants.b > 0.0 && c.constants.b < 0.5)) {
    bad("constants.b", "must lie in (0, 1/2)", "hyperbolic-time recurrence condition requires 0 < b < 1/2");
  }
  if (!std::isnan(c.constants.r) && !(c.constants.r > 0.0)) {
    bad("constants.r", "must be > 0", "the good collection G needs a positive threshold r");
  }
  if (gap_requested && !std::isnan(c.constants.r) && !std::isnan(c0) && c.constants.r > 0.5 * c0) {
    bad("constants.r", "exceeds c0_estimate / 2", "pressure gap of S needs r <= c0 / 2");
  }
  if (!(c.constants.gamma > 0.0)) bad("constants.gamma", "must be > 0", "slow recurrence uses a positive gamma");
  if (!(c.pressure.eps > 0.0)) bad("pressure.eps", "must be > 0", "separated sets need a positive scale");
  if (c.pressure.n_lo < 1 || c.pressure.n_hi < c.pressure.n_lo + 3) {
    bad("pressure.n_hi", "need n_lo >= 1 and at least 4 values of n", "the pressure slope fit needs 4 points");
  }
  if (!(c.bowen.eps > 0.0)) bad("bowen.eps", "must be > 0", "Bowen balls need a positive scale");
  if (!(c.glue.eps > 0.0)) bad("glue.eps", "must be > 0", "specification needs a positive scale");
  if (c.glue.max_length < 1) bad("glue.max_length", "must be >= 1", "segments need at least one point");
  if (c.ldp.n_grid.size() < 4) bad("ldp.n_grid", "need at least 4 values", "the decay-rate fit needs 4 points");
  for (double n : c.ldp.n_grid) {
    if (!(n >= 1.0) || n != std::floor(n)) bad("ldp.n_grid", "entries must be positive integers", "n counts iterates");
  }
  if (!(c.ldp.tolerance >= 0.0)) bad("ldp.tolerance", "must be >= 0", "tolerance is a slack on the rate inequality");
  for (double e : c.expansivity.eps_list) {
    if (!(e > 2e-6)) bad("expansivity.eps_list", "entries must exceed 2e-6", "pairs must clear the 1e-6 distinctness floor");
  }
  if (c.expansivity.N < 1) bad("expansivity.N", "must be >= 1", "Bowen balls need a horizon");
  return v;
}

}  // namespace viana
