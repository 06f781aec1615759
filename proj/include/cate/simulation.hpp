#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "cate/data_model.hpp"
#include "cate/estimators.hpp"
#include "cate/randomization.hpp"
#include "cate/rng.hpp"

namespace cate {

// ============================================================================
// Synthetic population generator. Covariates are bivariate normal with unit
// variances 2 and covariance rho; uptake is a deterministic threshold pair in
// x1 (so assignment can only raise uptake, never lower it); the outcome pair
// shares one latent Bernoulli draw per uptake level in x2, so units whose
// uptake ignores assignment have identical potential outcomes.
// ============================================================================

struct DgpParams {
  std::size_t n = 500;
  double n1_frac = 0.5;
  double rho = 0.0;
  std::uint64_t seed = 0;
};

// Stream indices >= 2^32 are reserved for population draws so replication
// streams (small indices) can never collide with them.
inline constexpr std::uint64_t kPopulationStreamBase = 1ULL << 32;

// Per unit the stream is consumed in a fixed order: two standard normals for
// the covariates, then two uniforms for the latent outcomes.
inline PotentialTable generate_population(const DgpParams& params, RngStream& rng) {
  if (!(std::fabs(params.rho) < 2.0))
    throw Error(ErrorKind::InvalidCovariance,
                "|rho| must be below 2 for a positive-definite covariance");
  if (params.n < 2)
    throw Error(ErrorKind::LengthMismatch, "population needs n >= 2");

  const double l11 = std::sqrt(2.0);
  const double l21 = params.rho / std::sqrt(2.0);
  const double l22 = std::sqrt(2.0 - params.rho * params.rho / 2.0);

  PotentialTable pop;
  pop.x.resize(static_cast<Eigen::Index>(params.n), 2);
  pop.y0.resize(params.n);
  pop.y1.resize(params.n);
  pop.d0.resize(params.n);
  pop.d1.resize(params.n);

  for (std::size_t i = 0; i < params.n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double x1 = l11 * z1;
    const double x2 = l21 * z1 + l22 * z2;
    pop.x(static_cast<Eigen::Index>(i), 0) = x1;
    pop.x(static_cast<Eigen::Index>(i), 1) = x2;

    const std::uint8_t d0 = (2.0 * x1 - 1.0 > 0.0) ? 1 : 0;
    const std::uint8_t d1 = (2.0 * x1 + 3.0 > 0.0) ? 1 : 0;
    const std::uint8_t ylat0 = rng.bernoulli(expit(-3.0 * x2)) ? 1 : 0;
    const std::uint8_t ylat1 = rng.bernoulli(expit(-3.0 * x2 + 1.0)) ? 1 : 0;
    pop.d0[i] = d0;
    pop.d1[i] = d1;
    pop.y0[i] = d0 ? ylat1 : ylat0;
    pop.y1[i] = d1 ? ylat1 : ylat0;
  }
  return pop;
}

inline PotentialTable generate_population(const DgpParams& params) {
  RngStream rng(params.seed, kPopulationStreamBase);
  return generate_population(params, rng);
}

// ============================================================================
// Monte Carlo over complete randomizations of a fixed population.
// ============================================================================

struct ReplicationRecord {
  std::size_t rep = 0;
  Method method = Method::Wald;
  Estimand estimand = Estimand::Cate;
  double point = std::numeric_limits<double>::quiet_NaN();
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
};

// One randomization: draw an assignment, reveal the sample, run every
// requested method leniently. A method fails the replication when it throws,
// returns non-finite values, trips the weak-denominator guard, or a model fit
// did not converge; separation with a converged fit is expected under
// threshold-uptake populations and is not a failure.
inline std::vector<ReplicationRecord> run_replication(
    const PotentialTable& pop, std::size_t n1, RngStream& rng,
    const std::vector<Method>& methods, const std::vector<Estimand>& estimands,
    const EstimatorOptions& opt = {}) {
  const Assignment z = complete_randomization(pop.n(), n1, rng);
  const ValidatedSample s = observe(pop, z);
  EstimatorOptions lenient = opt;
  lenient.strict = false;
  const std::vector<MethodResult> results = estimate_all(s, methods, estimands, lenient);

  std::vector<ReplicationRecord> out;
  out.reserve(results.size());
  for (const MethodResult& r : results) {
    ReplicationRecord rec;
    rec.method = r.method;
    rec.estimand = r.estimand;
    if (r.estimate) {
      const Estimate& e = *r.estimate;
      const bool weak = has_warning(e.warnings, WarningKind::WeakDenominator);
      const bool stuck = has_warning(e.warnings, WarningKind::DidNotConverge);
      const bool finite = std::isfinite(e.point) && std::isfinite(e.ci_lo) &&
                          std::isfinite(e.ci_hi);
      rec.failed = weak || stuck || !finite;
      if (finite) {
        rec.point = e.point;
        rec.ci_lo = e.ci_lo;
        rec.ci_hi = e.ci_hi;
      }
    } else {
      rec.failed = true;
    }
    out.push_back(rec);
  }
  return out;
}

struct McSummaryRow {
  Method method = Method::Wald;
  Estimand estimand = Estimand::Cate;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double n1_frac = std::numeric_limits<double>::quiet_NaN();
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;             // direct root mean squared error about truth
  double rmse_ratio = 0.0;       // vs the unadjusted row, same estimand
  double cp = 0.0;               // CI coverage of the population truth
  double ci_length = 0.0;        // mean interval length
  double length_ratio = 0.0;
  std::size_t n_failed = 0;
  std::size_t n_completed = 0;
  double truth = 0.0;
};

struct McResult {
  std::vector<ReplicationRecord> records;  // replication-major, method order fixed
  std::vector<McSummaryRow> summaries;
};

struct McOptions {
  std::size_t reps = 1000;
  unsigned threads = 1;
  std::uint64_t stream_base = 0;  // replication r uses stream stream_base + r
  std::vector<Method> methods{Method::Wald, Method::Ils, Method::Ob, Method::Cob};
  std::vector<Estimand> estimands{Estimand::Cate};
  EstimatorOptions est{};
};

// Replication r is a pure function of (master_seed, stream_base + r), so the
// record vector, and everything derived from it, is identical for any worker
// count; workers only decide which slots they fill.
inline McResult monte_carlo(const PotentialTable& pop, std::size_t n1,
                            std::uint64_t master_seed, const McOptions& mc) {
  if (mc.reps == 0) throw Error(ErrorKind::ConfigError, "reps must be positive");
  const TrueEstimands truths = true_estimands(pop);
  for (Estimand e : mc.estimands)
    if (e == Estimand::Mcate && !truths.tau_m)
      throw Error(ErrorKind::ZeroDenominator,
                  "ratio-scale truth undefined: population h-effect is zero");

  const std::size_t per_rep = mc.methods.size() * mc.estimands.size();
  McResult result;
  result.records.resize(mc.reps * per_rep);

  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      RngStream rng(master_seed, mc.stream_base + r);
      std::vector<ReplicationRecord> recs =
          run_replication(pop, n1, rng, mc.methods, mc.estimands, mc.est);
      for (std::size_t k = 0; k < per_rep; ++k) {
        recs[k].rep = r;
        result.records[r * per_rep + k] = recs[k];
      }
    }
  };

  const unsigned nthreads = std::max(1u, mc.threads);
  if (nthreads == 1) {
    worker(0, mc.reps);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (mc.reps + nthreads - 1) / nthreads;
    for (unsigned t = 0; t < nthreads; ++t) {
      const std::size_t lo = std::min<std::size_t>(t * chunk, mc.reps);
      const std::size_t hi = std::min<std::size_t>(lo + chunk, mc.reps);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  // Aggregate in fixed (method, estimand) order; failed replications are
  // excluded from every moment and counted.
  for (std::size_t ei = 0; ei < mc.estimands.size(); ++ei) {
    for (std::size_t mi = 0; mi < mc.methods.size(); ++mi) {
      McSummaryRow row;
      row.method = mc.methods[mi];
      row.estimand = mc.estimands[ei];
      row.truth = row.estimand == Estimand::Cate ? truths.tau : *truths.tau_m;

      double sum = 0.0, sum_len = 0.0;
      std::size_t n_ok = 0, covered = 0;
      const std::size_t k = ei * mc.methods.size() + mi;
      for (std::size_t r = 0; r < mc.reps; ++r) {
        const ReplicationRecord& rec = result.records[r * per_rep + k];
        if (rec.failed) {
          ++row.n_failed;
          continue;
        }
        ++n_ok;
        sum += rec.point;
        sum_len += rec.ci_hi - rec.ci_lo;
        if (rec.ci_lo <= row.truth && row.truth <= rec.ci_hi) ++covered;
      }
      row.n_completed = n_ok;
      if (n_ok > 0) {
        const double mean = sum / static_cast<double>(n_ok);
        row.bias = mean - row.truth;
        double ss_mean = 0.0, ss_truth = 0.0;
        for (std::size_t r = 0; r < mc.reps; ++r) {
          const ReplicationRecord& rec = result.records[r * per_rep + k];
          if (rec.failed) continue;
          ss_mean += (rec.point - mean) * (rec.point - mean);
          ss_truth += (rec.point - row.truth) * (rec.point - row.truth);
        }
        // One completed replication has no spread to estimate; report 0 and
        // let the reporting layer warn rather than poison downstream ratios.
        row.sd = n_ok > 1 ? std::sqrt(ss_mean / static_cast<double>(n_ok - 1))
                          : 0.0;
        row.rmse = std::sqrt(ss_truth / static_cast<double>(n_ok));
        row.cp = static_cast<double>(covered) / static_cast<double>(n_ok);
        row.ci_length = sum_len / static_cast<double>(n_ok);
      } else {
        row.bias = row.sd = row.rmse = row.cp = row.ci_length =
            std::numeric_limits<double>::quiet_NaN();
      }
      result.summaries.push_back(row);
    }
  }

  // Ratios against the unadjusted row of the same estimand.
  for (McSummaryRow& row : result.summaries) {
    const McSummaryRow* base = nullptr;
    for (const McSummaryRow& cand : result.summaries)
      if (cand.method == Method::Wald && cand.estimand == row.estimand) base = &cand;
    if (base != nullptr && base->n_completed > 0) {
      row.rmse_ratio = row.rmse / base->rmse;
      row.length_ratio = row.ci_length / base->ci_length;
    } else {
      row.rmse_ratio = std::numeric_limits<double>::quiet_NaN();
      row.length_ratio = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return result;
}

// ============================================================================
// Synthetic-population replay: rebuild a full potential table from one
// observed sample so the randomization distribution of the estimators can be
// studied on data shaped like a given study.
// ============================================================================

struct ReplayResult {
  PotentialTable pop;
  TrueEstimands truths;
  std::vector<Warning> warnings;
};

namespace detail {

// Within-arm outcome model that survives constant outcomes: those arms get a
// constant predictor instead of a diverging logistic fit.
struct ArmModel {
  bool constant = false;
  double value = 0.0;
  LogisticFit fit;

  double predict_row(const Eigen::MatrixXd& x, Eigen::Index i) const {
    if (constant) return value;
    double eta = fit.theta(0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * fit.theta(j + 1);
    return std::min(1.0 - 1e-15, std::max(1e-15, expit(eta)));
  }
};

inline ArmModel fit_arm_model(const Eigen::MatrixXd& x_arm, const Eigen::VectorXd& r_arm,
                              const char* label, const LogisticOptions& lopt,
                              std::vector<Warning>& warnings) {
  ArmModel m;
  const double first = r_arm.size() > 0 ? r_arm(0) : 0.0;
  if (r_arm.size() == 0 || ((r_arm.array() == first).all())) {
    m.constant = true;
    m.value = first;
    return m;
  }
  m.fit = fit_logistic(x_arm, r_arm, lopt);
  note_fit_warnings(m.fit, label, warnings);
  return m;
}

}  // namespace detail

// Imputation scheme: fit the four within-arm models, then complete each
// unit's missing cells in a fixed draw order (uptake first, then outcome).
// Monotonicity pins the missing uptake whenever the observed one determines
// it; units whose imputed uptake ignores assignment copy the observed outcome
// to the unobserved arm, so the rebuilt table satisfies both structural
// assumptions by construction and always reproduces the observed cells.
inline ReplayResult replay_synthetic_population(const ValidatedSample& s,
                                                std::uint64_t seed,
                                                const EstimatorOptions& opt = {}) {
  ReplayResult out;
  const Eigen::MatrixXd x1 = detail::subset_rows(s.x, s.treated);
  const Eigen::MatrixXd x0 = detail::subset_rows(s.x, s.control);
  const detail::ArmModel my1 = detail::fit_arm_model(
      x1, detail::subset(s.y, s.treated), "outcome model, treated arm",
      opt.logistic, out.warnings);
  const detail::ArmModel my0 = detail::fit_arm_model(
      x0, detail::subset(s.y, s.control), "outcome model, control arm",
      opt.logistic, out.warnings);
  const detail::ArmModel md1 = detail::fit_arm_model(
      x1, detail::subset(s.d, s.treated), "uptake model, treated arm",
      opt.logistic, out.warnings);
  const detail::ArmModel md0 = detail::fit_arm_model(
      x0, detail::subset(s.d, s.control), "uptake model, control arm",
      opt.logistic, out.warnings);
  if (opt.strict)
    for (const Warning& w : out.warnings)
      if (w.kind == WarningKind::Separation)
        throw Error(ErrorKind::SeparationDetected, w.message);

  RngStream rng(seed, kPopulationStreamBase + 1);
  PotentialTable pop;
  const std::size_t n = s.n;
  pop.x = s.x;
  pop.y0.resize(n);
  pop.y1.resize(n);
  pop.d0.resize(n);
  pop.d1.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    std::uint8_t d0, d1, y0, y1;
    if (s.z(idx) == 1.0) {
      d1 = static_cast<std::uint8_t>(s.d(idx));
      d0 = (d1 == 0) ? 0
                     : (rng.bernoulli(md0.predict_row(s.x, idx)) ? 1 : 0);
      y1 = static_cast<std::uint8_t>(s.y(idx));
      y0 = (d0 == d1) ? y1
                      : (rng.bernoulli(my0.predict_row(s.x, idx)) ? 1 : 0);
    } else {
      d0 = static_cast<std::uint8_t>(s.d(idx));
      d1 = (d0 == 1) ? 1
                     : (rng.bernoulli(md1.predict_row(s.x, idx)) ? 1 : 0);
      y0 = static_cast<std::uint8_t>(s.y(idx));
      y1 = (d0 == d1) ? y0
                      : (rng.bernoulli(my1.predict_row(s.x, idx)) ? 1 : 0);
    }
    pop.d0[i] = d0;
    pop.d1[i] = d1;
    pop.y0[i] = y0;
    pop.y1[i] = y1;
  }
  out.truths = true_estimands(pop);
  out.pop = std::move(pop);
  return out;
}

}  // namespace cate
