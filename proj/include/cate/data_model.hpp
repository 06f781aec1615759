#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cate/error.hpp"
#include "cate/randomization.hpp"

namespace cate {

// ============================================================================
// Potential-outcome table for a finite population under a binary instrument
// with binary uptake and binary outcome. Row i carries both potential uptake
// values (d0, d1) and both potential outcomes (y0, y1); exactly one of each
// pair is ever observed.
// ============================================================================

enum class Stratum { Complier, AlwaysTaker, NeverTaker, Defier };

// Exact integer comparison of the uptake pair; no tolerance is involved.
inline Stratum classify_stratum(std::uint8_t d0, std::uint8_t d1) {
  if (d0 == 0 && d1 == 1) return Stratum::Complier;
  if (d0 == 1 && d1 == 1) return Stratum::AlwaysTaker;
  if (d0 == 0 && d1 == 0) return Stratum::NeverTaker;
  return Stratum::Defier;
}

struct PotentialTable {
  std::vector<std::uint8_t> y0, y1;  // potential outcomes, binary
  std::vector<std::uint8_t> d0, d1;  // potential uptake, binary
  Eigen::MatrixXd x;                 // n x p covariates, finite

  std::size_t n() const { return y0.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
};

// Structural checks: equal lengths, binary values, finite covariates, n >= 2.
// Monotonicity (d1 >= d0 per unit) is reported, not enforced; the count of
// violations (defiers) comes back to the caller.
inline std::size_t validate_potential_table(const PotentialTable& pop) {
  const std::size_t n = pop.y0.size();
  if (pop.y1.size() != n || pop.d0.size() != n || pop.d1.size() != n ||
      (pop.x.size() > 0 && static_cast<std::size_t>(pop.x.rows()) != n))
    throw Error(ErrorKind::LengthMismatch, "potential table columns disagree on n");
  if (n < 2) throw Error(ErrorKind::LengthMismatch, "potential table needs n >= 2");
  for (std::size_t i = 0; i < n; ++i) {
    if (pop.y0[i] > 1 || pop.y1[i] > 1 || pop.d0[i] > 1 || pop.d1[i] > 1)
      throw Error(ErrorKind::NonBinaryValue, "potential values must be 0 or 1");
  }
  if (pop.x.size() > 0 && !pop.x.allFinite())
    throw Error(ErrorKind::NonFiniteInput, "covariates must be finite");
  std::size_t defiers = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (pop.d1[i] < pop.d0[i]) ++defiers;
  return defiers;
}

// ============================================================================
// Finite-population estimands.
// ============================================================================

struct TrueEstimands {
  double tau;                    // mean y1 - y0 over compliers
  double tau_y;                  // intention-to-treat effect on the outcome
  double tau_d;                  // intention-to-treat effect on uptake
  double tau_g;                  // ITT effect on g = y * d
  double tau_h;                  // ITT effect on h = y * (1 - d)
  std::optional<double> tau_m;   // -tau_g / tau_h; empty when tau_h == 0
  std::array<double, 4> strata_props;  // complier, always, never, defier
};

inline TrueEstimands true_estimands(const PotentialTable& pop) {
  validate_potential_table(pop);
  const std::size_t n = pop.n();
  double sum_c = 0.0, sum_y = 0.0, sum_d = 0.0, sum_g = 0.0, sum_h = 0.0;
  std::array<std::size_t, 4> counts{0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int y0 = pop.y0[i], y1 = pop.y1[i], d0 = pop.d0[i], d1 = pop.d1[i];
    switch (classify_stratum(pop.d0[i], pop.d1[i])) {
      case Stratum::Complier:
        ++counts[0];
        sum_c += y1 - y0;
        break;
      case Stratum::AlwaysTaker: ++counts[1]; break;
      case Stratum::NeverTaker: ++counts[2]; break;
      case Stratum::Defier: ++counts[3]; break;
    }
    sum_y += y1 - y0;
    sum_d += d1 - d0;
    sum_g += y1 * d1 - y0 * d0;
    sum_h += y1 * (1 - d1) - y0 * (1 - d0);
  }
  if (counts[0] == 0)
    throw Error(ErrorKind::NoCompliers, "population contains no compliers");
  TrueEstimands te;
  te.tau = sum_c / static_cast<double>(counts[0]);
  te.tau_y = sum_y / static_cast<double>(n);
  te.tau_d = sum_d / static_cast<double>(n);
  te.tau_g = sum_g / static_cast<double>(n);
  te.tau_h = sum_h / static_cast<double>(n);
  if (te.tau_h != 0.0) te.tau_m = -te.tau_g / te.tau_h;
  for (int s = 0; s < 4; ++s)
    te.strata_props[s] = static_cast<double>(counts[s]) / static_cast<double>(n);
  return te;
}

// ============================================================================
// Observed data.
// ============================================================================

struct ObservedSample {
  Eigen::VectorXd z;  // assignment indicator
  Eigen::VectorXd d;  // realized uptake
  Eigen::VectorXd y;  // realized outcome
  Eigen::MatrixXd x;  // n x p covariates (p may be 0)
};

// An ObservedSample that passed validation: binary z/d/y, finite x, both
// arms nonempty. Arm index lists are in increasing unit order.
struct ValidatedSample {
  Eigen::VectorXd z, d, y;
  Eigen::MatrixXd x;
  std::size_t n = 0, n1 = 0, n0 = 0;
  std::vector<Eigen::Index> treated, control;
};

inline ValidatedSample validate_observed(const ObservedSample& obs) {
  const Eigen::Index n = obs.z.size();
  if (obs.d.size() != n || obs.y.size() != n ||
      (obs.x.size() > 0 && obs.x.rows() != n))
    throw Error(ErrorKind::LengthMismatch, "observed columns disagree on n");
  if (n < 2) throw Error(ErrorKind::LengthMismatch, "sample needs n >= 2");
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((obs.z[i] != 0.0 && obs.z[i] != 1.0) ||
        (obs.d[i] != 0.0 && obs.d[i] != 1.0) ||
        (obs.y[i] != 0.0 && obs.y[i] != 1.0))
      throw Error(ErrorKind::NonBinaryValue,
                  "z, d, y must be exactly 0 or 1 at row " + std::to_string(i));
  }
  if (obs.x.size() > 0 && !obs.x.allFinite())
    throw Error(ErrorKind::NonFiniteInput, "covariates must be finite");

  ValidatedSample s;
  s.z = obs.z;
  s.d = obs.d;
  s.y = obs.y;
  s.x = obs.x.size() > 0 ? obs.x : Eigen::MatrixXd(n, 0);
  s.n = static_cast<std::size_t>(n);
  for (Eigen::Index i = 0; i < n; ++i)
    (obs.z[i] == 1.0 ? s.treated : s.control).push_back(i);
  s.n1 = s.treated.size();
  s.n0 = s.control.size();
  if (s.n1 == 0 || s.n0 == 0)
    throw Error(ErrorKind::EmptyArm, "both assignment arms must be nonempty");
  return s;
}

// Reveal the observed sample a given assignment produces from a potential
// table: d = d_z, y = y_z per unit.
inline ValidatedSample observe(const PotentialTable& pop, const Assignment& z) {
  const std::size_t n = pop.n();
  if (z.size() != n)
    throw Error(ErrorKind::LengthMismatch, "assignment length differs from n");
  ObservedSample obs;
  obs.z.resize(n);
  obs.d.resize(n);
  obs.y.resize(n);
  obs.x = pop.x.size() > 0 ? pop.x : Eigen::MatrixXd(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool t = z[i] != 0;
    obs.z[i] = t ? 1.0 : 0.0;
    obs.d[i] = t ? pop.d1[i] : pop.d0[i];
    obs.y[i] = t ? pop.y1[i] : pop.y0[i];
  }
  return validate_observed(obs);
}

// ============================================================================
// Compliance bookkeeping and ratio-scale outcome transforms.
// ============================================================================

// Assignment-by-uptake cell counts from observed data.
struct CrossTab {
  std::size_t n11 = 0;  // z=1, d=1
  std::size_t n10 = 0;  // z=1, d=0
  std::size_t n01 = 0;  // z=0, d=1
  std::size_t n00 = 0;  // z=0, d=0
};

inline CrossTab compliance_crosstab(const ValidatedSample& s) {
  CrossTab t;
  for (std::size_t i = 0; i < s.n; ++i) {
    if (s.z[i] == 1.0)
      ++(s.d[i] == 1.0 ? t.n11 : t.n10);
    else
      ++(s.d[i] == 1.0 ? t.n01 : t.n00);
  }
  return t;
}

// Outcome pair feeding the ratio-scale estimand: g = y*d, h = y*(1-d).
struct McateOutcomes {
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

inline McateOutcomes transform_mcate_outcomes(const ValidatedSample& s) {
  McateOutcomes out;
  out.g = s.y.cwiseProduct(s.d);
  out.h = s.y.cwiseProduct(Eigen::VectorXd::Ones(s.y.size()) - s.d);
  return out;
}

}  // namespace cate
