// Command-line front end. Subcommands mirror the run modes; a config file
// supplies defaults and explicit flags override it.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "cate/cate.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string input, output;
  std::string estimators, estimand, strictness;
  double alpha = -1.0;
  double weak_denom = -1.0;
  long long reps = -1, n = -1;
  long long seed = -1;
  std::string rho_list, frac_list;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CliArgs& a) {
  cmd->add_option("--config", a.config_path, "flat key=value configuration file");
  cmd->add_option("--output", a.output, "machine-readable summary CSV path");
  cmd->add_option("--estimators", a.estimators,
                  "comma list from wald,ils,ob,cob (default all)");
  cmd->add_option("--estimand", a.estimand, "cate, mcate or both");
  cmd->add_option("--alpha", a.alpha, "two-sided interval level (default 0.05)");
  cmd->add_option("--strictness", a.strictness, "lenient or strict");
  cmd->add_option("--weak-denom-threshold", a.weak_denom,
                  "warn below this |denominator ITT| (default 0.01)");
  cmd->add_option("--seed", a.seed, "master seed");
}

cate::RunConfig build_config(const CliArgs& a, const std::string& mode) {
  cate::RunConfig cfg;
  if (!a.config_path.empty()) cfg = cate::load_config(a.config_path);
  if (cfg.mode != mode && !a.config_path.empty() && cfg.mode != "simulate") {
    // A config written for another mode is honored only through `run`.
  }
  cfg.mode = mode;
  if (!a.input.empty()) cfg.input = a.input;
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.estimand.empty()) {
    if (a.estimand != "cate" && a.estimand != "mcate" && a.estimand != "both")
      throw cate::Error(cate::ErrorKind::ConfigError,
                        "estimand: must be cate, mcate or both");
    cfg.estimand = a.estimand;
  }
  if (!a.strictness.empty()) {
    if (a.strictness != "strict" && a.strictness != "lenient")
      throw cate::Error(cate::ErrorKind::ConfigError,
                        "strictness: must be strict or lenient");
    cfg.strictness = a.strictness;
  }
  if (!a.estimators.empty()) {
    cfg.estimators.clear();
    for (const std::string& part : cate::detail::split_csv_line(a.estimators))
      cfg.estimators.push_back(cate::detail::method_from_name(part));
  }
  if (a.alpha >= 0.0) {
    if (!(a.alpha > 0.0 && a.alpha < 1.0))
      throw cate::Error(cate::ErrorKind::ConfigError, "alpha: must lie in (0,1)");
    cfg.alpha = a.alpha;
  }
  if (a.weak_denom >= 0.0) cfg.weak_denom_threshold = a.weak_denom;
  if (a.reps > 0) cfg.reps = static_cast<std::size_t>(a.reps);
  if (a.n > 0) {
    if (a.n < 2)
      throw cate::Error(cate::ErrorKind::ConfigError, "n: must be at least 2");
    cfg.n = static_cast<std::size_t>(a.n);
  }
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (!a.rho_list.empty())
    cfg.rho = cate::detail::config_double_list("rho", a.rho_list);
  if (!a.frac_list.empty()) {
    cfg.n1_frac = cate::detail::config_double_list("n1_frac", a.frac_list);
    for (double f : cfg.n1_frac)
      if (!(f > 0.0 && f < 1.0))
        throw cate::Error(cate::ErrorKind::ConfigError,
                          "n1_frac: entries must lie in (0,1)");
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Complier treatment-effect estimation for binary outcomes under "
      "noncompliance: unadjusted, covariate-interacted, imputation and "
      "calibrated-imputation ratio estimators with conservative intervals."};
  app.require_subcommand(1);

  CliArgs a;

  CLI::App* analyze = app.add_subcommand(
      "analyze", "estimate effects on an observed CSV (z,d,y,covariates)");
  analyze->add_option("--input", a.input, "observed-sample CSV")->required(false);
  add_common(analyze, a);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo on threshold-uptake synthetic populations");
  add_common(simulate, a);
  simulate->add_option("--n", a.n, "population size (default 500)");
  simulate->add_option("--reps", a.reps, "randomizations per cell (default 1000)");
  simulate->add_option("--rho", a.rho_list, "covariate covariance, comma list for a grid");
  simulate->add_option("--n1-frac", a.frac_list,
                       "treated fraction, comma list for a grid");
  simulate->add_option("--threads", a.threads,
                       "worker threads (output is identical for any count)");

  CLI::App* replay = app.add_subcommand(
      "replay", "rebuild a synthetic population from a CSV and rerun the bench");
  replay->add_option("--input", a.input, "observed-sample CSV");
  add_common(replay, a);
  replay->add_option("--reps", a.reps, "randomizations (default 1000)");
  replay->add_option("--threads", a.threads, "worker threads");

  CLI::App* run = app.add_subcommand("run", "run the mode named in --config");
  run->add_option("--config", a.config_path, "flat key=value configuration file")
      ->required();
  run->add_option("--threads", a.threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    cate::RunConfig cfg;
    if (app.got_subcommand(run)) {
      cfg = cate::load_config(a.config_path);
      return cate::run_command(cfg, a.threads, std::cout);
    }
    const std::string mode = app.got_subcommand(analyze)   ? "analyze"
                             : app.got_subcommand(simulate) ? "simulate"
                                                            : "replay";
    cfg = build_config(a, mode);
    return cate::run_command(cfg, a.threads, std::cout);
  } catch (const cate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cate::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
