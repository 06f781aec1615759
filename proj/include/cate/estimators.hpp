#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cate/data_model.hpp"
#include "cate/error.hpp"
#include "cate/logistic.hpp"
#include "cate/normal.hpp"
#include "cate/ols.hpp"

namespace cate {

// ============================================================================
// Shared estimator vocabulary.
// ============================================================================

enum class Method { Wald, Ils, Ob, Cob };
enum class Estimand { Cate, Mcate };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Wald: return "wald";
    case Method::Ils: return "ils";
    case Method::Ob: return "ob";
    case Method::Cob: return "cob";
  }
  return "?";
}

inline const char* estimand_name(Estimand e) {
  return e == Estimand::Cate ? "cate" : "mcate";
}

struct EstimatorOptions {
  double alpha = 0.05;
  bool strict = false;                // upgrade recoverable warnings to errors
  double weak_denom_threshold = 0.01;  // |denominator ITT| below this warns
  double clip = 1e-6;                  // calibration probability clipping
  LogisticOptions logistic{};
};

// Point estimate with a conservative variance for sqrt(n)(point - truth).
struct Estimate {
  Method method = Method::Wald;
  Estimand estimand = Estimand::Cate;
  double point = 0.0;
  double sigma2_hat = 0.0;
  double se = 0.0;  // sqrt(sigma2_hat / n)
  double ci_lo = 0.0, ci_hi = 0.0;
  double denom_hat = 0.0;  // uptake ITT for CATE; minus the h-outcome ITT for MCATE
  double alpha = 0.05;
  std::size_t n = 0;
  std::vector<Warning> warnings;
};

// Arm-wise transformed outcomes feeding the conservative variance, with the
// degrees-of-freedom divisors their fitting step consumed.
struct TransformedOutcomes {
  Eigen::VectorXd a1, a0;
  double df1 = 0.0, df0 = 0.0;
};

namespace detail {

inline Eigen::VectorXd subset(const Eigen::VectorXd& v,
                              const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

inline Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& m,
                                   const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

inline double arm_mean(const Eigen::VectorXd& v,
                       const std::vector<Eigen::Index>& idx) {
  double s = 0.0;
  for (Eigen::Index i : idx) s += v(i);
  return s / static_cast<double>(idx.size());
}

}  // namespace detail

// Sum of squared deviations about the mean over the given divisor.
inline double sample_variance(const Eigen::VectorXd& v, double df) {
  if (df <= 0.0)
    throw Error(ErrorKind::NonPositiveDf, "variance divisor must be positive");
  const double m = v.mean();
  return (v.array() - m).square().sum() / df;
}

// ============================================================================
// Variance and interval machinery (common to all four estimators).
// ============================================================================

// sigma2 = (n / denom^2) * { s2(a1)/n1 + s2(a0)/n0 }.
inline double conservative_variance(const TransformedOutcomes& t, double denom_hat,
                                    std::size_t n) {
  if (denom_hat == 0.0)
    throw Error(ErrorKind::WeakDenominator, "denominator estimate is exactly zero");
  if (t.df1 <= 0.0 || t.df0 <= 0.0)
    throw Error(ErrorKind::NonPositiveDf, "nonpositive variance divisor");
  const double s1 = sample_variance(t.a1, t.df1);
  const double s0 = sample_variance(t.a0, t.df0);
  const double n1 = static_cast<double>(t.a1.size());
  const double n0 = static_cast<double>(t.a0.size());
  return (static_cast<double>(n) / (denom_hat * denom_hat)) * (s1 / n1 + s0 / n0);
}

struct Interval {
  double lo, hi;
};

inline Interval confidence_interval(double point, double sigma2_hat, std::size_t n,
                                    double alpha) {
  if (!(sigma2_hat >= 0.0))
    throw Error(ErrorKind::NonFiniteInput, "negative or non-finite variance");
  const double half =
      two_sided_quantile(alpha) * std::sqrt(sigma2_hat / static_cast<double>(n));
  return {point - half, point + half};
}

// ============================================================================
// Intention-to-treat difference in means.
// ============================================================================

enum class OutcomeSelector { Y, D, G, H };

inline double itt_difference_in_means(const ValidatedSample& s,
                                      const Eigen::VectorXd& outcome) {
  if (outcome.size() != static_cast<Eigen::Index>(s.n))
    throw Error(ErrorKind::LengthMismatch, "outcome length differs from n");
  return detail::arm_mean(outcome, s.treated) - detail::arm_mean(outcome, s.control);
}

inline double itt_difference_in_means(const ValidatedSample& s, OutcomeSelector sel) {
  switch (sel) {
    case OutcomeSelector::Y: return itt_difference_in_means(s, s.y);
    case OutcomeSelector::D: return itt_difference_in_means(s, s.d);
    case OutcomeSelector::G:
      return itt_difference_in_means(s, Eigen::VectorXd(s.y.cwiseProduct(s.d)));
    case OutcomeSelector::H:
      return itt_difference_in_means(
          s, Eigen::VectorXd(s.y.cwiseProduct((1.0 - s.d.array()).matrix())));
  }
  throw Error(ErrorKind::ConfigError, "unknown outcome selector");
}

// ============================================================================
// Ratio-estimator cores. Every estimator divides an adjusted ITT effect on a
// numerator outcome by one on a denominator outcome; CATE uses (y, d) and the
// ratio-scale estimand uses (g, h) with a sign flip applied by the wrapper.
// ============================================================================

namespace detail {

struct CoreResult {
  double tau_num = 0.0, tau_den = 0.0, point = 0.0;
  TransformedOutcomes t;
  std::vector<Warning> warnings;
};

inline CoreResult wald_core(const ValidatedSample& s, const Eigen::VectorXd& num,
                            const Eigen::VectorXd& den) {
  CoreResult r;
  r.tau_num = arm_mean(num, s.treated) - arm_mean(num, s.control);
  r.tau_den = arm_mean(den, s.treated) - arm_mean(den, s.control);
  r.point = r.tau_num / r.tau_den;
  r.t.a1.resize(static_cast<Eigen::Index>(s.n1));
  r.t.a0.resize(static_cast<Eigen::Index>(s.n0));
  for (std::size_t k = 0; k < s.n1; ++k) {
    const Eigen::Index i = s.treated[k];
    r.t.a1(static_cast<Eigen::Index>(k)) = num(i) - r.point * den(i);
  }
  for (std::size_t k = 0; k < s.n0; ++k) {
    const Eigen::Index i = s.control[k];
    r.t.a0(static_cast<Eigen::Index>(k)) = num(i) - r.point * den(i);
  }
  r.t.df1 = static_cast<double>(s.n1) - 1.0;
  r.t.df0 = static_cast<double>(s.n0) - 1.0;
  return r;
}

// Per-arm least-squares pieces shared by the interacted and calibrated
// estimators: the adjusted ITT form
//   { m1 - (xbar1 - xbar)'b1 } - { m0 - (xbar0 - xbar)'b0 }
// and transformed outcomes num - point*den - (x - xbar)'(b_num - point*b_den).
struct ArmFits {
  LinearFit num1, num0, den1, den0;
};

inline CoreResult adjusted_core(const ValidatedSample& s, const Eigen::VectorXd& num,
                                const Eigen::VectorXd& den, const Eigen::MatrixXd& xmat,
                                const ArmFits& f, const char* what) {
  CoreResult r;
  const Eigen::VectorXd xbar = xmat.colwise().mean();
  const Eigen::VectorXd xbar1 = subset_rows(xmat, s.treated).colwise().mean();
  const Eigen::VectorXd xbar0 = subset_rows(xmat, s.control).colwise().mean();

  const double m1n = arm_mean(num, s.treated), m0n = arm_mean(num, s.control);
  const double m1d = arm_mean(den, s.treated), m0d = arm_mean(den, s.control);
  r.tau_num = (m1n - (xbar1 - xbar).dot(f.num1.slopes)) -
              (m0n - (xbar0 - xbar).dot(f.num0.slopes));
  r.tau_den = (m1d - (xbar1 - xbar).dot(f.den1.slopes)) -
              (m0d - (xbar0 - xbar).dot(f.den0.slopes));
  r.point = r.tau_num / r.tau_den;

  const Eigen::VectorXd contrast1 = f.num1.slopes - r.point * f.den1.slopes;
  const Eigen::VectorXd contrast0 = f.num0.slopes - r.point * f.den0.slopes;
  r.t.a1.resize(static_cast<Eigen::Index>(s.n1));
  r.t.a0.resize(static_cast<Eigen::Index>(s.n0));
  for (std::size_t k = 0; k < s.n1; ++k) {
    const Eigen::Index i = s.treated[k];
    r.t.a1(static_cast<Eigen::Index>(k)) =
        num(i) - r.point * den(i) - (xmat.row(i).transpose() - xbar).dot(contrast1);
  }
  for (std::size_t k = 0; k < s.n0; ++k) {
    const Eigen::Index i = s.control[k];
    r.t.a0(static_cast<Eigen::Index>(k)) =
        num(i) - r.point * den(i) - (xmat.row(i).transpose() - xbar).dot(contrast0);
  }
  r.t.df1 = static_cast<double>(s.n1) - 1.0 - static_cast<double>(f.num1.rank);
  r.t.df0 = static_cast<double>(s.n0) - 1.0 - static_cast<double>(f.num0.rank);

  const std::size_t dropped =
      f.num1.dropped_columns.size() + f.num0.dropped_columns.size();
  if (dropped > 0)
    r.warnings.push_back({WarningKind::DroppedColumns,
                          std::string(what) + ": dropped " + std::to_string(dropped) +
                              " rank-deficient column(s) across arms"});
  return r;
}

// Denominator policy plus interval assembly shared by every method.
inline Estimate finish(const ValidatedSample& s, CoreResult core, Method method,
                       Estimand estimand, const EstimatorOptions& opt) {
  Estimate e;
  e.method = method;
  e.estimand = estimand;
  e.alpha = opt.alpha;
  e.n = s.n;
  e.warnings = std::move(core.warnings);

  if (opt.strict) {
    for (const auto& w : e.warnings) {
      if (w.kind == WarningKind::Separation)
        throw Error(ErrorKind::SeparationDetected, w.message);
      if (w.kind == WarningKind::DidNotConverge)
        throw Error(ErrorKind::NoConvergence, w.message);
    }
  }
  if (core.tau_den == 0.0)
    throw Error(ErrorKind::WeakDenominator, "denominator estimate is exactly zero");
  if (std::fabs(core.tau_den) < opt.weak_denom_threshold) {
    const std::string msg = "denominator estimate " + std::to_string(core.tau_den) +
                            " below threshold " +
                            std::to_string(opt.weak_denom_threshold);
    if (opt.strict) throw Error(ErrorKind::WeakDenominator, msg);
    e.warnings.push_back({WarningKind::WeakDenominator, msg});
  }

  e.sigma2_hat = conservative_variance(core.t, core.tau_den, s.n);
  e.se = std::sqrt(e.sigma2_hat / static_cast<double>(s.n));
  const bool flip = estimand == Estimand::Mcate;
  e.point = flip ? -core.point : core.point;
  e.denom_hat = flip ? -core.tau_den : core.tau_den;
  const Interval ci = confidence_interval(e.point, e.sigma2_hat, s.n, opt.alpha);
  e.ci_lo = ci.lo;
  e.ci_hi = ci.hi;
  if (!std::isfinite(e.point) || !std::isfinite(e.sigma2_hat))
    throw Error(ErrorKind::NonFiniteInput, "estimate did not evaluate to finite values");
  return e;
}

}  // namespace detail

// ============================================================================
// Unadjusted ratio (Wald) estimator.
// ============================================================================

namespace detail {
inline Estimate wald_pair(const ValidatedSample& s, const Eigen::VectorXd& num,
                          const Eigen::VectorXd& den, Estimand estimand,
                          const EstimatorOptions& opt) {
  if (s.n1 < 2 || s.n0 < 2)
    throw Error(ErrorKind::InsufficientArmSize, "wald needs at least 2 units per arm");
  return finish(s, wald_core(s, num, den), Method::Wald, estimand, opt);
}
}  // namespace detail

inline Estimate wald(const ValidatedSample& s, const EstimatorOptions& opt = {}) {
  return detail::wald_pair(s, s.y, s.d, Estimand::Cate, opt);
}

// ============================================================================
// Interacted least-squares adjustment: separate within-arm regressions on
// covariates for both outcomes, recombined at the full-sample covariate mean.
// ============================================================================

namespace detail {
inline Estimate ils_pair(const ValidatedSample& s, const Eigen::VectorXd& num,
                         const Eigen::VectorXd& den, Estimand estimand,
                         const EstimatorOptions& opt) {
  const Eigen::Index p = s.x.cols();
  if (static_cast<Eigen::Index>(s.n1) <= p + 1 ||
      static_cast<Eigen::Index>(s.n0) <= p + 1)
    throw Error(ErrorKind::InsufficientArmSize,
                "interacted least squares needs n_z > p + 1 in each arm");
  ArmFits f;
  const Eigen::MatrixXd x1 = subset_rows(s.x, s.treated);
  const Eigen::MatrixXd x0 = subset_rows(s.x, s.control);
  f.num1 = fit_ols(x1, subset(num, s.treated));
  f.num0 = fit_ols(x0, subset(num, s.control));
  f.den1 = fit_ols(x1, subset(den, s.treated));
  f.den0 = fit_ols(x0, subset(den, s.control));
  return finish(s, adjusted_core(s, num, den, s.x, f, "ils"), Method::Ils, estimand, opt);
}
}  // namespace detail

inline Estimate ils_interactions(const ValidatedSample& s,
                                 const EstimatorOptions& opt = {}) {
  return detail::ils_pair(s, s.y, s.d, Estimand::Cate, opt);
}

// ============================================================================
// Imputation (Oaxaca-Blinder) machinery. The engine works from prediction
// vectors so its algebra can be driven by any within-arm model; the default
// wrapper supplies within-arm logistic fits.
// ============================================================================

// Within-arm model predictions for both outcomes under both assignments,
// evaluated at every unit.
struct ImputationModel {
  Eigen::VectorXd mu_num1, mu_num0, mu_den1, mu_den0;  // each length n
  double params1 = 0.0, params0 = 0.0;  // slope counts consumed per arm
  std::vector<Warning> warnings;
};

namespace detail {

inline void note_fit_warnings(const LogisticFit& fit, const char* label,
                              std::vector<Warning>& out) {
  if (fit.separation_flag)
    out.push_back({WarningKind::Separation,
                   std::string(label) + ": separated fit (max |linear predictor| " +
                       std::to_string(fit.max_abs_linpred) + ")"});
  if (!fit.converged)
    out.push_back({WarningKind::DidNotConverge,
                   std::string(label) + ": Newton iterations exhausted"});
}

}  // namespace detail

// The four within-arm logistic fits behind the imputation and calibration
// estimators for the outcome pair (num, den).
inline ImputationModel fit_imputation_models(const ValidatedSample& s,
                                             const Eigen::VectorXd& num,
                                             const Eigen::VectorXd& den,
                                             const EstimatorOptions& opt = {}) {
  const Eigen::Index p = s.x.cols();
  if (static_cast<Eigen::Index>(s.n1) < p + 2 ||
      static_cast<Eigen::Index>(s.n0) < p + 2)
    throw Error(ErrorKind::InsufficientArmSize,
                "imputation models need n_z >= p + 2 in each arm");
  const Eigen::MatrixXd x1 = detail::subset_rows(s.x, s.treated);
  const Eigen::MatrixXd x0 = detail::subset_rows(s.x, s.control);

  ImputationModel m;
  const LogisticFit f_num1 = fit_logistic(x1, detail::subset(num, s.treated), opt.logistic);
  const LogisticFit f_num0 = fit_logistic(x0, detail::subset(num, s.control), opt.logistic);
  const LogisticFit f_den1 = fit_logistic(x1, detail::subset(den, s.treated), opt.logistic);
  const LogisticFit f_den0 = fit_logistic(x0, detail::subset(den, s.control), opt.logistic);
  detail::note_fit_warnings(f_num1, "numerator model, treated arm", m.warnings);
  detail::note_fit_warnings(f_num0, "numerator model, control arm", m.warnings);
  detail::note_fit_warnings(f_den1, "denominator model, treated arm", m.warnings);
  detail::note_fit_warnings(f_den0, "denominator model, control arm", m.warnings);
  m.mu_num1 = predict_logistic(f_num1, s.x);
  m.mu_num0 = predict_logistic(f_num0, s.x);
  m.mu_den1 = predict_logistic(f_den1, s.x);
  m.mu_den0 = predict_logistic(f_den0, s.x);
  m.params1 = static_cast<double>(p);
  m.params0 = static_cast<double>(p);
  return m;
}

namespace detail {

// Double-imputation point estimate plus model-residual transformed outcomes.
inline CoreResult ob_core(const ValidatedSample& s, const Eigen::VectorXd& num,
                          const Eigen::VectorXd& den, const ImputationModel& m) {
  CoreResult r;
  r.warnings = m.warnings;
  const double n = static_cast<double>(s.n);

  auto imputed_itt = [&](const Eigen::VectorXd& obs, const Eigen::VectorXd& mu1,
                         const Eigen::VectorXd& mu0) {
    double s1 = 0.0, s0 = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.n); ++i) {
      const bool treated = s.z(i) == 1.0;
      s1 += treated ? obs(i) : mu1(i);
      s0 += treated ? mu0(i) : obs(i);
    }
    return (s1 - s0) / n;
  };
  r.tau_num = imputed_itt(num, m.mu_num1, m.mu_num0);
  r.tau_den = imputed_itt(den, m.mu_den1, m.mu_den0);
  r.point = r.tau_num / r.tau_den;

  r.t.a1.resize(static_cast<Eigen::Index>(s.n1));
  r.t.a0.resize(static_cast<Eigen::Index>(s.n0));
  for (std::size_t k = 0; k < s.n1; ++k) {
    const Eigen::Index i = s.treated[k];
    r.t.a1(static_cast<Eigen::Index>(k)) =
        num(i) - r.point * den(i) - (m.mu_num1(i) - r.point * m.mu_den1(i));
  }
  for (std::size_t k = 0; k < s.n0; ++k) {
    const Eigen::Index i = s.control[k];
    r.t.a0(static_cast<Eigen::Index>(k)) =
        num(i) - r.point * den(i) - (m.mu_num0(i) - r.point * m.mu_den0(i));
  }
  r.t.df1 = static_cast<double>(s.n1) - 1.0 - m.params1;
  r.t.df0 = static_cast<double>(s.n0) - 1.0 - m.params0;
  return r;
}

inline Estimate ob_pair(const ValidatedSample& s, const Eigen::VectorXd& num,
                        const Eigen::VectorXd& den, const ImputationModel& m,
                        Estimand estimand, const EstimatorOptions& opt) {
  return finish(s, ob_core(s, num, den, m), Method::Ob, estimand, opt);
}

// Calibration estimator: treat the four prediction columns as constructed
// covariates, clip them away from {0,1}, and run the interacted
// least-squares recombination on them.
inline Estimate cob_pair(const ValidatedSample& s, const Eigen::VectorXd& num,
                         const Eigen::VectorXd& den, const ImputationModel& m,
                         Estimand estimand, const EstimatorOptions& opt) {
  constexpr Eigen::Index kCols = 4;
  if (static_cast<Eigen::Index>(s.n1) <= kCols + 1 ||
      static_cast<Eigen::Index>(s.n0) <= kCols + 1)
    throw Error(ErrorKind::InsufficientArmSize,
                "calibration needs more than 5 units in each arm");

  Eigen::MatrixXd w(static_cast<Eigen::Index>(s.n), kCols);
  w.col(0) = m.mu_num1;
  w.col(1) = m.mu_num0;
  w.col(2) = m.mu_den1;
  w.col(3) = m.mu_den0;
  const double lo = opt.clip, hi = 1.0 - opt.clip;
  std::size_t clipped = 0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < kCols; ++j) {
      if (w(i, j) < lo) { w(i, j) = lo; ++clipped; }
      else if (w(i, j) > hi) { w(i, j) = hi; ++clipped; }
    }

  ArmFits f;
  const Eigen::MatrixXd w1 = subset_rows(w, s.treated);
  const Eigen::MatrixXd w0 = subset_rows(w, s.control);
  f.num1 = fit_ols(w1, subset(num, s.treated));
  f.num0 = fit_ols(w0, subset(num, s.control));
  f.den1 = fit_ols(w1, subset(den, s.treated));
  f.den0 = fit_ols(w0, subset(den, s.control));

  CoreResult core = adjusted_core(s, num, den, w, f, "calibration");
  core.warnings.insert(core.warnings.begin(), m.warnings.begin(), m.warnings.end());
  if (clipped > 0)
    core.warnings.push_back({WarningKind::ClippedProbabilities,
                             "clipped " + std::to_string(clipped) +
                                 " fitted probabilities to [" + std::to_string(lo) +
                                 ", 1 - " + std::to_string(lo) + "]"});
  return finish(s, std::move(core), Method::Cob, estimand, opt);
}

}  // namespace detail

// Imputation estimator with caller-supplied predictions (the model-swap hook
// used to cross-check the algebra against its closed-form linear special
// case).
inline Estimate ob_with_model(const ValidatedSample& s, const ImputationModel& m,
                              const EstimatorOptions& opt = {}) {
  return detail::ob_pair(s, s.y, s.d, m, Estimand::Cate, opt);
}

inline Estimate ob_logistic(const ValidatedSample& s, const EstimatorOptions& opt = {}) {
  return detail::ob_pair(s, s.y, s.d, fit_imputation_models(s, s.y, s.d, opt),
                         Estimand::Cate, opt);
}

// Calibration estimator with caller-supplied predictions.
inline Estimate cob_with_model(const ValidatedSample& s, const ImputationModel& m,
                               const EstimatorOptions& opt = {}) {
  return detail::cob_pair(s, s.y, s.d, m, Estimand::Cate, opt);
}

inline Estimate cob(const ValidatedSample& s, const EstimatorOptions& opt = {}) {
  return detail::cob_pair(s, s.y, s.d, fit_imputation_models(s, s.y, s.d, opt),
                          Estimand::Cate, opt);
}

// ============================================================================
// Ratio-scale estimand: minus the ratio of ITT effects on g = y*d and
// h = y*(1-d). All four methods reuse their CATE machinery on (g, h); the
// sign flip lives here, not in the variance.
// ============================================================================

inline Estimate mcate(const ValidatedSample& s, Method method,
                      const EstimatorOptions& opt = {}) {
  const McateOutcomes gh = transform_mcate_outcomes(s);
  switch (method) {
    case Method::Wald:
      return detail::wald_pair(s, gh.g, gh.h, Estimand::Mcate, opt);
    case Method::Ils:
      return detail::ils_pair(s, gh.g, gh.h, Estimand::Mcate, opt);
    case Method::Ob:
      return detail::ob_pair(s, gh.g, gh.h,
                             fit_imputation_models(s, gh.g, gh.h, opt),
                             Estimand::Mcate, opt);
    case Method::Cob:
      return detail::cob_pair(s, gh.g, gh.h,
                              fit_imputation_models(s, gh.g, gh.h, opt),
                              Estimand::Mcate, opt);
  }
  throw Error(ErrorKind::ConfigError, "unknown method");
}

inline Estimate estimate_one(const ValidatedSample& s, Method method,
                             Estimand estimand, const EstimatorOptions& opt = {}) {
  if (estimand == Estimand::Mcate) return mcate(s, method, opt);
  switch (method) {
    case Method::Wald: return wald(s, opt);
    case Method::Ils: return ils_interactions(s, opt);
    case Method::Ob: return ob_logistic(s, opt);
    case Method::Cob: return cob(s, opt);
  }
  throw Error(ErrorKind::ConfigError, "unknown method");
}

// One method's outcome inside a batch: either an estimate or the error that
// stopped it. Batch evaluation shares the four logistic fits between the
// imputation and calibration estimators.
struct MethodResult {
  Method method = Method::Wald;
  Estimand estimand = Estimand::Cate;
  std::optional<Estimate> estimate;
  std::optional<ErrorKind> error_kind;
  std::string error_message;
};

inline std::vector<MethodResult> estimate_all(const ValidatedSample& s,
                                              const std::vector<Method>& methods,
                                              const std::vector<Estimand>& estimands,
                                              const EstimatorOptions& opt = {}) {
  std::vector<MethodResult> out;
  for (Estimand estimand : estimands) {
    const Eigen::VectorXd* num = &s.y;
    const Eigen::VectorXd* den = &s.d;
    McateOutcomes gh;
    if (estimand == Estimand::Mcate) {
      gh = transform_mcate_outcomes(s);
      num = &gh.g;
      den = &gh.h;
    }
    bool need_models = false;
    for (Method m : methods)
      if (m == Method::Ob || m == Method::Cob) need_models = true;
    std::optional<ImputationModel> models;
    std::optional<Error> model_error;
    if (need_models) {
      try {
        models = fit_imputation_models(s, *num, *den, opt);
      } catch (const Error& err) {
        model_error = err;
      }
    }
    for (Method m : methods) {
      MethodResult r;
      r.method = m;
      r.estimand = estimand;
      try {
        switch (m) {
          case Method::Wald:
            r.estimate = detail::wald_pair(s, *num, *den, estimand, opt);
            break;
          case Method::Ils:
            r.estimate = detail::ils_pair(s, *num, *den, estimand, opt);
            break;
          case Method::Ob:
            if (model_error) throw *model_error;
            r.estimate = detail::ob_pair(s, *num, *den, *models, estimand, opt);
            break;
          case Method::Cob:
            if (model_error) throw *model_error;
            r.estimate = detail::cob_pair(s, *num, *den, *models, estimand, opt);
            break;
        }
      } catch (const Error& err) {
        r.error_kind = err.kind();
        r.error_message = err.what();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ============================================================================
// Variance-gain diagnostics: per-arm adjustment contrasts and the quadratic
// forms that explain how much conservative variance the adjusted estimators
// remove relative to the unadjusted ratio.
//
// Report mode evaluates the quadratic forms against full-sample covariate
// covariance with each estimator's own plug-ins, mirroring the population
// statements. Oracle mode puts everything on one scale (shared tau plug-in,
// shared denominator, n_z - 1 divisors, within-arm covariances); on that
// scale sigma2_wald - sigma2_ils and sigma2_wald - sigma2_cob equal their
// quadratic forms to rounding error.
// ============================================================================

enum class DiagMode { Report, Oracle };

struct DiagnosticsReport {
  Eigen::VectorXd delta1, delta0;  // covariate-adjustment contrasts per arm
  Eigen::VectorXd phi1, phi0;      // calibration contrasts per arm
  double variance_reduction_ils = 0.0;
  double variance_reduction_cob = 0.0;
  double sigma2_wald = 0.0, sigma2_ils = 0.0, sigma2_cob = 0.0;
};

namespace detail {

inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& m, double df) {
  const Eigen::RowVectorXd mean = m.colwise().mean();
  const Eigen::MatrixXd c = m.rowwise() - mean;
  return (c.transpose() * c) / df;
}

// Variance of num - tau*den - (x - center)'contrast over the rows idx,
// divisor df.
inline double adjusted_arm_variance(const ValidatedSample& s,
                                    const Eigen::VectorXd& num,
                                    const Eigen::VectorXd& den,
                                    const Eigen::MatrixXd& xmat, double tau,
                                    const Eigen::VectorXd& contrast,
                                    const std::vector<Eigen::Index>& idx, double df) {
  const Eigen::VectorXd xbar = xmat.colwise().mean();
  Eigen::VectorXd a(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Index i = idx[k];
    a(static_cast<Eigen::Index>(k)) =
        num(i) - tau * den(i) - (xmat.row(i).transpose() - xbar).dot(contrast);
  }
  return sample_variance(a, df);
}

}  // namespace detail

inline DiagnosticsReport variance_gain_diagnostics(const ValidatedSample& s,
                                                   const EstimatorOptions& opt = {},
                                                   DiagMode mode = DiagMode::Report) {
  const Eigen::Index p = s.x.cols();
  if (static_cast<Eigen::Index>(s.n1) <= std::max<Eigen::Index>(p, 4) + 1 ||
      static_cast<Eigen::Index>(s.n0) <= std::max<Eigen::Index>(p, 4) + 1)
    throw Error(ErrorKind::InsufficientArmSize, "diagnostics need both adjusted fits");

  // Within-arm covariate fits.
  const Eigen::MatrixXd x1 = detail::subset_rows(s.x, s.treated);
  const Eigen::MatrixXd x0 = detail::subset_rows(s.x, s.control);
  detail::ArmFits fx;
  fx.num1 = fit_ols(x1, detail::subset(s.y, s.treated));
  fx.num0 = fit_ols(x0, detail::subset(s.y, s.control));
  fx.den1 = fit_ols(x1, detail::subset(s.d, s.treated));
  fx.den0 = fit_ols(x0, detail::subset(s.d, s.control));
  detail::CoreResult ils = detail::adjusted_core(s, s.y, s.d, s.x, fx, "ils");

  // Calibration fits on clipped predictions.
  const ImputationModel m = fit_imputation_models(s, s.y, s.d, opt);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(s.n), 4);
  w.col(0) = m.mu_num1;
  w.col(1) = m.mu_num0;
  w.col(2) = m.mu_den1;
  w.col(3) = m.mu_den0;
  w = w.array().max(opt.clip).min(1.0 - opt.clip).matrix();
  detail::ArmFits fw;
  const Eigen::MatrixXd w1 = detail::subset_rows(w, s.treated);
  const Eigen::MatrixXd w0 = detail::subset_rows(w, s.control);
  fw.num1 = fit_ols(w1, detail::subset(s.y, s.treated));
  fw.num0 = fit_ols(w0, detail::subset(s.y, s.control));
  fw.den1 = fit_ols(w1, detail::subset(s.d, s.treated));
  fw.den0 = fit_ols(w0, detail::subset(s.d, s.control));
  detail::CoreResult cal = detail::adjusted_core(s, s.y, s.d, w, fw, "calibration");

  DiagnosticsReport rep;
  const double n = static_cast<double>(s.n);
  const double n1 = static_cast<double>(s.n1);
  const double n0 = static_cast<double>(s.n0);

  if (mode == DiagMode::Report) {
    // Each estimator's own plug-in.
    rep.delta1 = fx.num1.slopes - ils.point * fx.den1.slopes;
    rep.delta0 = fx.num0.slopes - ils.point * fx.den0.slopes;
    rep.phi1 = fw.num1.slopes - cal.point * fw.den1.slopes;
    rep.phi0 = fw.num0.slopes - cal.point * fw.den0.slopes;
    const Eigen::MatrixXd sx = detail::covariance(s.x, n - 1.0);
    const Eigen::MatrixXd sw = detail::covariance(w, n - 1.0);
    rep.variance_reduction_ils =
        (n / (ils.tau_den * ils.tau_den)) *
        (rep.delta1.dot(sx * rep.delta1) / n1 + rep.delta0.dot(sx * rep.delta0) / n0);
    rep.variance_reduction_cob =
        (n / (cal.tau_den * cal.tau_den)) *
        (rep.phi1.dot(sw * rep.phi1) / n1 + rep.phi0.dot(sw * rep.phi0) / n0);
    const detail::CoreResult wc = detail::wald_core(s, s.y, s.d);
    rep.sigma2_wald = conservative_variance(wc.t, wc.tau_den, s.n);
    rep.sigma2_ils = conservative_variance(ils.t, ils.tau_den, s.n);
    rep.sigma2_cob = conservative_variance(cal.t, cal.tau_den, s.n);
    return rep;
  }

  // Oracle scale: shared plug-in tau (the adjusted point), shared denominator,
  // n_z - 1 divisors, within-arm covariances.
  const double tau = ils.point;
  const double denom2 = ils.tau_den * ils.tau_den;
  rep.delta1 = fx.num1.slopes - tau * fx.den1.slopes;
  rep.delta0 = fx.num0.slopes - tau * fx.den0.slopes;
  rep.phi1 = fw.num1.slopes - tau * fw.den1.slopes;
  rep.phi0 = fw.num0.slopes - tau * fw.den0.slopes;

  const Eigen::VectorXd zero_x = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(4);
  const double var_wald_1 = detail::adjusted_arm_variance(
      s, s.y, s.d, s.x, tau, zero_x, s.treated, n1 - 1.0);
  const double var_wald_0 = detail::adjusted_arm_variance(
      s, s.y, s.d, s.x, tau, zero_x, s.control, n0 - 1.0);
  const double var_ils_1 = detail::adjusted_arm_variance(
      s, s.y, s.d, s.x, tau, rep.delta1, s.treated, n1 - 1.0);
  const double var_ils_0 = detail::adjusted_arm_variance(
      s, s.y, s.d, s.x, tau, rep.delta0, s.control, n0 - 1.0);
  const double var_cob_1 = detail::adjusted_arm_variance(
      s, s.y, s.d, w, tau, rep.phi1, s.treated, n1 - 1.0);
  const double var_cob_0 = detail::adjusted_arm_variance(
      s, s.y, s.d, w, tau, rep.phi0, s.control, n0 - 1.0);

  rep.sigma2_wald = (n / denom2) * (var_wald_1 / n1 + var_wald_0 / n0);
  rep.sigma2_ils = (n / denom2) * (var_ils_1 / n1 + var_ils_0 / n0);
  rep.sigma2_cob = (n / denom2) * (var_cob_1 / n1 + var_cob_0 / n0);

  const Eigen::MatrixXd sx1 = detail::covariance(x1, n1 - 1.0);
  const Eigen::MatrixXd sx0 = detail::covariance(x0, n0 - 1.0);
  const Eigen::MatrixXd sw1 = detail::covariance(w1, n1 - 1.0);
  const Eigen::MatrixXd sw0 = detail::covariance(w0, n0 - 1.0);
  rep.variance_reduction_ils =
      (n / denom2) *
      (rep.delta1.dot(sx1 * rep.delta1) / n1 + rep.delta0.dot(sx0 * rep.delta0) / n0);
  rep.variance_reduction_cob =
      (n / denom2) *
      (rep.phi1.dot(sw1 * rep.phi1) / n1 + rep.phi0.dot(sw0 * rep.phi0) / n0);
  return rep;
}

}  // namespace cate
