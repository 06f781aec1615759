#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "cate/config.hpp"
#include "cate/csv.hpp"
#include "cate/estimators.hpp"
#include "cate/simulation.hpp"

namespace cate {

// Process exit codes: 0 success, 2 configuration, 3 data, 4 estimation.
inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidCovariance:
    case ErrorKind::InvalidArmSize:
      return 2;
    case ErrorKind::ParseError:
    case ErrorKind::MissingColumn:
    case ErrorKind::NonBinaryValue:
    case ErrorKind::LengthMismatch:
    case ErrorKind::EmptyArm:
    case ErrorKind::IoError:
      return 3;
    default:
      return 4;
  }
}

namespace detail {

// "foo.csv" -> "foo_reps.csv"; extensionless paths get the suffix appended.
inline std::string replications_path(const std::string& output) {
  const auto dot = output.find_last_of('.');
  const auto slash = output.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return output + "_reps";
  return output.substr(0, dot) + "_reps" + output.substr(dot);
}

inline void write_summary_csv(std::ostream& out, const std::vector<McSummaryRow>& rows) {
  out << "method,estimand,rho,n1_frac,bias,sd,rmse,rmse_ratio,cp,ci_length,"
         "length_ratio,n_failed\n";
  for (const McSummaryRow& r : rows) {
    out << method_name(r.method) << ',' << estimand_name(r.estimand) << ','
        << fmt_sig10(r.rho) << ',' << fmt_sig10(r.n1_frac) << ','
        << fmt_sig10(r.bias) << ',' << fmt_sig10(r.sd) << ',' << fmt_sig10(r.rmse)
        << ',' << fmt_sig10(r.rmse_ratio) << ',' << fmt_sig10(r.cp) << ','
        << fmt_sig10(r.ci_length) << ',' << fmt_sig10(r.length_ratio) << ','
        << r.n_failed << '\n';
  }
}

inline void write_records_csv(std::ostream& out,
                              const std::vector<ReplicationRecord>& records) {
  out << "rep,method,estimand,point,ci_lo,ci_hi,failed\n";
  for (const ReplicationRecord& r : records) {
    out << r.rep << ',' << method_name(r.method) << ',' << estimand_name(r.estimand)
        << ',' << fmt_sig10(r.point) << ',' << fmt_sig10(r.ci_lo) << ','
        << fmt_sig10(r.ci_hi) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open output file: " + path);
  return out;
}

inline void print_summary_table(std::ostream& out, const std::vector<McSummaryRow>& rows) {
  out << std::left << std::setw(6) << "method" << std::setw(8) << "estimand"
      << std::right << std::setw(7) << "rho" << std::setw(9) << "n1_frac"
      << std::setw(9) << "bias" << std::setw(8) << "sd" << std::setw(8) << "rmse"
      << std::setw(7) << "rmse/" << std::setw(7) << "cp" << std::setw(9) << "len"
      << std::setw(7) << "len/" << std::setw(8) << "failed" << '\n';
  for (const McSummaryRow& r : rows) {
    out << std::left << std::setw(6) << method_name(r.method) << std::setw(8)
        << estimand_name(r.estimand) << std::right << std::setw(7)
        << fmt_fixed3(r.rho) << std::setw(9) << fmt_fixed3(r.n1_frac) << std::setw(9)
        << fmt_fixed3(r.bias) << std::setw(8) << fmt_fixed3(r.sd) << std::setw(8)
        << fmt_fixed3(r.rmse) << std::setw(7) << fmt_fixed3(r.rmse_ratio)
        << std::setw(7) << fmt_fixed3(r.cp) << std::setw(9) << fmt_fixed3(r.ci_length)
        << std::setw(7) << fmt_fixed3(r.length_ratio) << std::setw(8) << r.n_failed
        << '\n';
  }
  for (const McSummaryRow& r : rows)
    if (r.n_completed < 2) {
      out << "warning: sd needs at least 2 completed replications; "
             "degenerate rows report sd as 0\n";
      break;
    }
}

}  // namespace detail

// ============================================================================
// analyze: estimate both effect scales on one observed CSV.
// ============================================================================

struct AnalysisRow {
  Method method;
  Estimand estimand;
  bool ok = false;
  double point = 0.0, ci_lo = 0.0, ci_hi = 0.0, sigma2 = 0.0;
  double variance_reduction = std::numeric_limits<double>::quiet_NaN();
  std::vector<Warning> warnings;
  std::string error;
};

struct AnalysisReport {
  CrossTab crosstab;
  std::size_t n = 0, n1 = 0, n0 = 0, p = 0;
  std::vector<AnalysisRow> rows;
};

inline AnalysisReport analyze_sample(const ValidatedSample& s, const RunConfig& cfg) {
  AnalysisReport rep;
  rep.crosstab = compliance_crosstab(s);
  rep.n = s.n;
  rep.n1 = s.n1;
  rep.n0 = s.n0;
  rep.p = static_cast<std::size_t>(s.x.cols());

  const std::vector<MethodResult> results =
      estimate_all(s, cfg.estimators, cfg.estimand_list(), cfg.estimator_options());
  if (cfg.strict())
    for (const MethodResult& r : results)
      if (r.error_kind) throw Error(*r.error_kind, r.error_message);

  for (const MethodResult& r : results) {
    AnalysisRow row;
    row.method = r.method;
    row.estimand = r.estimand;
    if (r.estimate) {
      row.ok = true;
      row.point = r.estimate->point;
      row.ci_lo = r.estimate->ci_lo;
      row.ci_hi = r.estimate->ci_hi;
      row.sigma2 = r.estimate->sigma2_hat;
      row.warnings = r.estimate->warnings;
    } else {
      row.error = r.error_message;
    }
    rep.rows.push_back(std::move(row));
  }

  // Conservative-variance reduction against the unadjusted row, per estimand.
  for (AnalysisRow& row : rep.rows) {
    if (!row.ok) continue;
    for (const AnalysisRow& base : rep.rows)
      if (base.method == Method::Wald && base.estimand == row.estimand && base.ok &&
          base.sigma2 > 0.0)
        row.variance_reduction = 1.0 - row.sigma2 / base.sigma2;
  }
  return rep;
}

inline int analyze_command(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty())
    throw Error(ErrorKind::ConfigError, "analyze requires an input CSV path");
  const CsvData data = load_csv(cfg.input);
  const ValidatedSample s = validate_observed(data.obs);
  const AnalysisReport rep = analyze_sample(s, cfg);

  out << "n=" << rep.n << " (treated " << rep.n1 << ", control " << rep.n0
      << "), covariates p=" << rep.p << "\n";
  out << "assignment x uptake crosstab:\n";
  out << "           d=1     d=0\n";
  out << "  z=1 " << std::setw(8) << rep.crosstab.n11 << std::setw(8)
      << rep.crosstab.n10 << "\n";
  out << "  z=0 " << std::setw(8) << rep.crosstab.n01 << std::setw(8)
      << rep.crosstab.n00 << "\n\n";
  out << std::left << std::setw(6) << "method" << std::setw(8) << "estimand"
      << std::right << std::setw(9) << "point" << std::setw(9) << "ci_lo"
      << std::setw(9) << "ci_hi" << std::setw(10) << "variance" << std::setw(9)
      << "var.red" << '\n';
  for (const AnalysisRow& row : rep.rows) {
    out << std::left << std::setw(6) << method_name(row.method) << std::setw(8)
        << estimand_name(row.estimand);
    if (row.ok) {
      out << std::right << std::setw(9) << fmt_fixed3(row.point) << std::setw(9)
          << fmt_fixed3(row.ci_lo) << std::setw(9) << fmt_fixed3(row.ci_hi)
          << std::setw(10) << fmt_fixed3(row.sigma2) << std::setw(9)
          << fmt_fixed3(row.variance_reduction) << '\n';
      for (const Warning& w : row.warnings)
        out << "    [" << warning_kind_name(w.kind) << "] " << w.message << '\n';
    } else {
      out << "  failed: " << row.error << '\n';
    }
  }

  if (!cfg.output.empty()) {
    std::ofstream f = detail::open_output(cfg.output);
    f << "method,estimand,point,ci_lo,ci_hi,variance,variance_reduction\n";
    for (const AnalysisRow& row : rep.rows) {
      if (!row.ok) continue;
      f << method_name(row.method) << ',' << estimand_name(row.estimand) << ','
        << fmt_sig10(row.point) << ',' << fmt_sig10(row.ci_lo) << ','
        << fmt_sig10(row.ci_hi) << ',' << fmt_sig10(row.sigma2) << ','
        << fmt_sig10(row.variance_reduction) << '\n';
    }
  }
  return 0;
}

// ============================================================================
// simulate: Monte Carlo over fresh threshold-uptake populations, optionally a
// grid over rho and the treated fraction. One population per rho value is
// drawn and shared across fractions. Output bytes depend only on the
// configuration and seed, never on the worker count.
// ============================================================================

inline int simulate_command(const RunConfig& cfg, unsigned threads, std::ostream& out) {
  std::vector<McSummaryRow> all_rows;
  std::vector<ReplicationRecord> all_records;

  for (std::size_t ri = 0; ri < cfg.rho.size(); ++ri) {
    DgpParams params;
    params.n = cfg.n;
    params.rho = cfg.rho[ri];
    params.seed = cfg.seed;
    RngStream pop_rng(cfg.seed, kPopulationStreamBase + ri);
    const PotentialTable pop = generate_population(params, pop_rng);

    for (std::size_t fj = 0; fj < cfg.n1_frac.size(); ++fj) {
      const double frac = cfg.n1_frac[fj];
      const auto n1 = static_cast<std::size_t>(
          std::llround(static_cast<double>(cfg.n) * frac));
      const std::size_t combo = ri * cfg.n1_frac.size() + fj;

      McOptions mc;
      mc.reps = cfg.reps;
      mc.threads = threads;
      mc.stream_base = combo * cfg.reps;
      mc.methods = cfg.estimators;
      mc.estimands = cfg.estimand_list();
      mc.est = cfg.estimator_options();
      McResult res = monte_carlo(pop, n1, cfg.seed, mc);

      for (McSummaryRow row : res.summaries) {
        row.rho = cfg.rho[ri];
        row.n1_frac = frac;
        all_rows.push_back(row);
      }
      for (ReplicationRecord rec : res.records) {
        rec.rep += mc.stream_base;  // unique id: the replication's stream index
        all_records.push_back(rec);
      }
    }
  }

  detail::print_summary_table(out, all_rows);
  if (!cfg.output.empty()) {
    std::ofstream f = detail::open_output(cfg.output);
    detail::write_summary_csv(f, all_rows);
    std::ofstream g = detail::open_output(detail::replications_path(cfg.output));
    detail::write_records_csv(g, all_records);
  }
  return 0;
}

// ============================================================================
// replay: rebuild a potential table from an observed CSV, report its true
// effect values, then run the same Monte Carlo machinery on it.
// ============================================================================

inline int replay_command(const RunConfig& cfg, unsigned threads, std::ostream& out) {
  if (cfg.input.empty())
    throw Error(ErrorKind::ConfigError, "replay requires an input CSV path");
  const CsvData data = load_csv(cfg.input);
  const ValidatedSample s = validate_observed(data.obs);

  const ReplayResult rr =
      replay_synthetic_population(s, cfg.seed, cfg.estimator_options());
  out << "synthetic population truths: cate=" << fmt_sig10(rr.truths.tau)
      << " mcate="
      << (rr.truths.tau_m ? fmt_sig10(*rr.truths.tau_m) : std::string("undefined"))
      << " complier_share=" << fmt_sig10(rr.truths.strata_props[0]) << "\n";
  for (const Warning& w : rr.warnings)
    out << "  [" << warning_kind_name(w.kind) << "] " << w.message << '\n';

  McOptions mc;
  mc.reps = cfg.reps;
  mc.threads = threads;
  mc.stream_base = 0;
  mc.methods = cfg.estimators;
  mc.estimands = cfg.estimand_list();
  mc.est = cfg.estimator_options();
  McResult res = monte_carlo(rr.pop, s.n1, cfg.seed, mc);

  std::vector<McSummaryRow> rows;
  for (McSummaryRow row : res.summaries) {
    row.n1_frac = static_cast<double>(s.n1) / static_cast<double>(s.n);
    rows.push_back(row);
  }
  detail::print_summary_table(out, rows);
  if (!cfg.output.empty()) {
    std::ofstream f = detail::open_output(cfg.output);
    detail::write_summary_csv(f, rows);
    std::ofstream g = detail::open_output(detail::replications_path(cfg.output));
    detail::write_records_csv(g, res.records);
  }
  return 0;
}

inline int run_command(const RunConfig& cfg, unsigned threads, std::ostream& out) {
  if (cfg.mode == "analyze") return analyze_command(cfg, out);
  if (cfg.mode == "simulate") return simulate_command(cfg, threads, out);
  if (cfg.mode == "replay") return replay_command(cfg, threads, out);
  throw Error(ErrorKind::ConfigError, "unknown mode: " + cfg.mode);
}

}  // namespace cate
