#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svie/coefficients.hpp"
#include "svie/fbm.hpp"

namespace svie {

enum class ExperimentKind {
  BoundCheck31,
  BoundCheck32,
  BoundCheck34,
  GradientCheck,
  DensityStudy,
  ScalingStudy,
  FbmValidate,
  IntegralValidate
};

inline const std::map<std::string, ExperimentKind>& experiment_kind_names() {
  static const std::map<std::string, ExperimentKind> names = {
      {"BoundCheck31", ExperimentKind::BoundCheck31},
      {"BoundCheck32", ExperimentKind::BoundCheck32},
      {"BoundCheck34", ExperimentKind::BoundCheck34},
      {"GradientCheck", ExperimentKind::GradientCheck},
      {"DensityStudy", ExperimentKind::DensityStudy},
      {"ScalingStudy", ExperimentKind::ScalingStudy},
      {"FbmValidate", ExperimentKind::FbmValidate},
      {"IntegralValidate", ExperimentKind::IntegralValidate}};
  return names;
}

inline std::string experiment_kind_name(ExperimentKind k) {
  for (const auto& [name, kind] : experiment_kind_names())
    if (kind == k) return name;
  return "unknown";
}

/// Aggregated parse/validation failure. Collects every violation, not just
/// the first.
class config_error : public std::runtime_error {
public:
  explicit config_error(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "config invalid:";
    for (const auto& line : v) s += "\n  - " + line;
    return s;
  }
  std::vector<std::string> violations_;
};

/// Declarative experiment description, parsed from the line-oriented
/// `key = value` format with `[section]` headers.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::FbmValidate;
  FracParams params{0.75, 0.3, 1.0, 1.0, 1.0};
  double T = 1.0;
  int n = 64;
  int d = 1;
  int m = 1;
  std::string family = "constant";
  std::map<std::string, double> family_params;
  int paths = 1;
  std::uint64_t seed = 0;
  std::vector<double> lambda_ladder = {1.0, 2.0, 4.0, 8.0};
  std::vector<double> epsilon_ladder = {1e-2, 1e-3, 1e-4};
  std::string out_dir = "out";
  double x0 = 1.0;
  double C = 1.0;
  double w0 = 1.0;
  double t_eval = -1.0; // < 0 means T
  int lattice_points = 64;
  double bandwidth = 0.0; // 0 = Scott's rule
  int workers = 1;

  /// Sorted canonical key=value rendering; basis for the config hash.
  std::string canonical() const;
  std::uint64_t hash() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct RawConfig {
  std::map<std::string, std::string> entries; // "section.key" -> value
  std::vector<std::string> errors;
};

inline RawConfig parse_raw(std::istream& in) {
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        raw.errors.push_back("line " + std::to_string(lineno) +
                             ": unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raw.errors.push_back("line " + std::to_string(lineno) +
                           ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    raw.entries[full] = value;
  }
  return raw;
}

inline bool parse_double_token(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::string token;
  std::string norm = s;
  for (auto& c : norm)
    if (c == ',') c = ' ';
  std::istringstream iss2(norm);
  while (iss2 >> token) {
    double v;
    if (!parse_double_token(token, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

} // namespace detail

inline std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["experiment.kind"] = experiment_kind_name(kind);
  kv["experiment.paths"] = std::to_string(paths);
  kv["experiment.seed"] = std::to_string(seed);
  kv["grid.T"] = detail::format_g17(T);
  kv["grid.n"] = std::to_string(n);
  kv["params.H"] = detail::format_g17(params.H);
  kv["params.alpha"] = detail::format_g17(params.alpha);
  kv["params.beta"] = detail::format_g17(params.beta);
  kv["params.delta"] = detail::format_g17(params.delta);
  kv["params.mu"] = detail::format_g17(params.mu);
  kv["model.d"] = std::to_string(d);
  kv["model.m"] = std::to_string(m);
  kv["model.family"] = family;
  kv["model.x0"] = detail::format_g17(x0);
  for (const auto& [k, v] : family_params)
    kv["model." + k] = detail::format_g17(v);
  kv["bounds.C"] = detail::format_g17(C);
  kv["bounds.w0"] = detail::format_g17(w0);
  {
    std::string s;
    for (double v : lambda_ladder) s += detail::format_g17(v) + " ";
    kv["experiment.lambda_ladder"] = s;
  }
  {
    std::string s;
    for (double v : epsilon_ladder) s += detail::format_g17(v) + " ";
    kv["experiment.epsilon_ladder"] = s;
  }
  kv["density.t_eval"] = detail::format_g17(t_eval);
  kv["density.lattice_points"] = std::to_string(lattice_points);
  kv["density.bandwidth"] = detail::format_g17(bandwidth);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline std::uint64_t ExperimentConfig::hash() const {
  return detail::fnv1a64(canonical());
}

/// Parses and validates a config file. Throws config_error carrying every
/// parse problem and every violated admissibility constraint.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw config_error({"cannot open config file: " + path});
  detail::RawConfig raw = detail::parse_raw(in);
  std::vector<std::string> errors = raw.errors;
  ExperimentConfig cfg;

  auto take = [&](const std::string& key) -> const std::string* {
    auto it = raw.entries.find(key);
    return it == raw.entries.end() ? nullptr : &it->second;
  };
  auto need = [&](const std::string& key) -> const std::string* {
    const std::string* v = take(key);
    if (!v) errors.push_back("missing required field: " + key);
    return v;
  };
  auto get_double = [&](const std::string* v, const std::string& key,
                        double& out) {
    if (!v) return;
    if (!detail::parse_double_token(*v, out))
      errors.push_back("field " + key + ": not a number: " + *v);
  };
  auto get_int = [&](const std::string* v, const std::string& key, int& out) {
    double x = 0;
    if (!v) return;
    if (!detail::parse_double_token(*v, x) || x != std::floor(x))
      errors.push_back("field " + key + ": not an integer: " + *v);
    else
      out = static_cast<int>(x);
  };

  if (const auto* v = need("experiment.kind")) {
    auto it = experiment_kind_names().find(*v);
    if (it == experiment_kind_names().end())
      errors.push_back("unknown experiment kind: " + *v);
    else
      cfg.kind = it->second;
  }
  if (const auto* v = need("experiment.seed")) {
    try {
      std::size_t pos = 0;
      cfg.seed = std::stoull(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("trailing");
    } catch (...) {
      errors.push_back("field experiment.seed: not a u64: " + *v);
    }
  }
  get_int(need("experiment.paths"), "experiment.paths", cfg.paths);
  if (const auto* v = take("experiment.out")) cfg.out_dir = *v;
  if (const auto* v = take("experiment.lambda_ladder"))
    if (!detail::parse_list(*v, cfg.lambda_ladder))
      errors.push_back("field experiment.lambda_ladder: bad list");
  if (const auto* v = take("experiment.epsilon_ladder"))
    if (!detail::parse_list(*v, cfg.epsilon_ladder))
      errors.push_back("field experiment.epsilon_ladder: bad list");

  get_double(need("grid.T"), "grid.T", cfg.T);
  get_int(need("grid.n"), "grid.n", cfg.n);
  get_double(need("params.H"), "params.H", cfg.params.H);
  get_double(need("params.alpha"), "params.alpha", cfg.params.alpha);
  get_double(take("params.beta"), "params.beta", cfg.params.beta);
  get_double(take("params.delta"), "params.delta", cfg.params.delta);
  get_double(take("params.mu"), "params.mu", cfg.params.mu);

  get_int(take("model.d"), "model.d", cfg.d);
  get_int(take("model.m"), "model.m", cfg.m);
  if (const auto* v = need("model.family")) cfg.family = *v;
  get_double(take("model.x0"), "model.x0", cfg.x0);
  get_double(take("bounds.C"), "bounds.C", cfg.C);
  get_double(take("bounds.w0"), "bounds.w0", cfg.w0);
  get_double(take("density.t_eval"), "density.t_eval", cfg.t_eval);
  get_int(take("density.lattice_points"), "density.lattice_points",
          cfg.lattice_points);
  get_double(take("density.bandwidth"), "density.bandwidth", cfg.bandwidth);

  // remaining model.* keys are family parameters
  static const std::vector<std::string> reserved = {"model.d", "model.m",
                                                    "model.family", "model.x0"};
  for (const auto& [k, v] : raw.entries) {
    if (k.rfind("model.", 0) != 0) continue;
    if (std::find(reserved.begin(), reserved.end(), k) != reserved.end())
      continue;
    double x;
    if (!detail::parse_double_token(v, x))
      errors.push_back("field " + k + ": not a number: " + v);
    else
      cfg.family_params[k.substr(6)] = x;
  }

  // admissibility: every violated inequality reported individually
  for (const auto& msg : cfg.params.violations()) errors.push_back(msg);
  if (cfg.n < 16) errors.push_back("grid.n must be >= 16");
  if (cfg.paths < 1) errors.push_back("experiment.paths must be >= 1");
  if (cfg.T <= 0.0) errors.push_back("grid.T must be positive");
  if (cfg.d < 1 || cfg.m < 1) errors.push_back("model dims must be >= 1");
  {
    const auto ids = built_in_family_ids();
    if (std::find(ids.begin(), ids.end(), cfg.family) == ids.end())
      errors.push_back("unknown coefficient family: " + cfg.family);
  }

  if (!errors.empty()) throw config_error(errors);
  return cfg;
}

} // namespace svie
