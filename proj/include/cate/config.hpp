#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cate/csv.hpp"
#include "cate/error.hpp"
#include "cate/estimators.hpp"

namespace cate {

// Flat key=value run configuration. '#' starts a comment, blank lines are
// ignored, unknown keys are rejected. An empty file is a valid configuration:
// every field below holds its default.
struct RunConfig {
  std::string mode = "simulate";  // analyze | simulate | replay
  std::vector<Method> estimators{Method::Wald, Method::Ils, Method::Ob, Method::Cob};
  std::string estimand = "both";  // cate | mcate | both
  double alpha = 0.05;
  std::size_t reps = 1000;
  std::size_t n = 500;
  std::vector<double> n1_frac{0.5};  // simulate accepts a comma list (grid)
  std::vector<double> rho{0.0};      // simulate accepts a comma list (grid)
  std::uint64_t seed = 12345;
  std::string input;   // observed-sample CSV (analyze, replay)
  std::string output;  // machine-readable CSV destination
  std::string strictness = "lenient";  // lenient | strict
  double weak_denom_threshold = 0.01;

  bool strict() const { return strictness == "strict"; }

  std::vector<Estimand> estimand_list() const {
    if (estimand == "cate") return {Estimand::Cate};
    if (estimand == "mcate") return {Estimand::Mcate};
    return {Estimand::Cate, Estimand::Mcate};
  }

  EstimatorOptions estimator_options() const {
    EstimatorOptions opt;
    opt.alpha = alpha;
    opt.strict = strict();
    opt.weak_denom_threshold = weak_denom_threshold;
    return opt;
  }
};

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  try {
    return parse_double_field(value, 0, 0);
  } catch (const Error&) {
    throw Error(ErrorKind::ConfigError, key + ": not a number: '" + value + "'");
  }
}

inline std::uint64_t config_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw Error(ErrorKind::ConfigError,
                key + ": not a nonnegative integer: '" + value + "'");
  return v;
}

inline std::vector<double> config_double_list(const std::string& key,
                                              const std::string& value) {
  std::vector<double> out;
  for (const std::string& part : split_csv_line(value))
    out.push_back(config_double(key, part));
  if (out.empty()) throw Error(ErrorKind::ConfigError, key + ": empty list");
  return out;
}

inline Method method_from_name(const std::string& name) {
  if (name == "wald") return Method::Wald;
  if (name == "ils") return Method::Ils;
  if (name == "ob") return Method::Ob;
  if (name == "cob") return Method::Cob;
  throw Error(ErrorKind::ConfigError, "estimators: unknown method '" + name + "'");
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::ConfigError,
                  "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "mode") {
      if (value != "analyze" && value != "simulate" && value != "replay")
        throw Error(ErrorKind::ConfigError, "mode: must be analyze, simulate or replay");
      cfg.mode = value;
    } else if (key == "estimators") {
      cfg.estimators.clear();
      for (const std::string& part : detail::split_csv_line(value))
        cfg.estimators.push_back(detail::method_from_name(part));
      if (cfg.estimators.empty())
        throw Error(ErrorKind::ConfigError, "estimators: empty list");
    } else if (key == "estimand") {
      if (value != "cate" && value != "mcate" && value != "both")
        throw Error(ErrorKind::ConfigError, "estimand: must be cate, mcate or both");
      cfg.estimand = value;
    } else if (key == "alpha") {
      cfg.alpha = detail::config_double(key, value);
      if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw Error(ErrorKind::ConfigError, "alpha: must lie in (0,1)");
    } else if (key == "reps") {
      cfg.reps = detail::config_uint(key, value);
      if (cfg.reps == 0) throw Error(ErrorKind::ConfigError, "reps: must be positive");
    } else if (key == "n") {
      cfg.n = detail::config_uint(key, value);
      if (cfg.n < 2) throw Error(ErrorKind::ConfigError, "n: must be at least 2");
    } else if (key == "n1_frac") {
      cfg.n1_frac = detail::config_double_list(key, value);
      for (double f : cfg.n1_frac)
        if (!(f > 0.0 && f < 1.0))
          throw Error(ErrorKind::ConfigError, "n1_frac: entries must lie in (0,1)");
    } else if (key == "rho") {
      cfg.rho = detail::config_double_list(key, value);
    } else if (key == "seed") {
      cfg.seed = detail::config_uint(key, value);
    } else if (key == "input") {
      cfg.input = value;
    } else if (key == "output") {
      cfg.output = value;
    } else if (key == "strictness") {
      if (value != "strict" && value != "lenient")
        throw Error(ErrorKind::ConfigError, "strictness: must be strict or lenient");
      cfg.strictness = value;
    } else if (key == "weak_denom_threshold") {
      cfg.weak_denom_threshold = detail::config_double(key, value);
      if (!(cfg.weak_denom_threshold >= 0.0))
        throw Error(ErrorKind::ConfigError,
                    "weak_denom_threshold: must be nonnegative");
    } else {
      throw Error(ErrorKind::ConfigError,
                  "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file: " + path);
  return parse_config(in);
}

}  // namespace cate
