#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <string>
#include <vector>

#include "cate/error.hpp"

namespace cate {

// Least-squares fit with an always-present intercept. Slopes are reported at
// full length p; entries for dropped rank-deficient columns are zero.
struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd slopes;                     // length p
  std::vector<Eigen::Index> dropped_columns;  // increasing order
  Eigen::VectorXd fitted;                     // length n
  Eigen::VectorXd residuals;                  // length n; sums to zero
  Eigen::Index rank = 0;                      // retained slope columns
};

// OLS via orthogonal decomposition on mean-centered columns. Rank detection
// treats singular values below 1e-10 times the largest as zero; the dropped
// set is chosen by column-pivot order so the retained block is the
// best-conditioned basis of the same span.
inline LinearFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = x.cols();
  if (n == 0) throw Error(ErrorKind::DegenerateDesign, "empty design");
  if (x.size() > 0 && x.rows() != n)
    throw Error(ErrorKind::LengthMismatch, "design rows differ from outcome length");
  if (!y.allFinite() || (x.size() > 0 && !x.allFinite()))
    throw Error(ErrorKind::NonFiniteInput, "fit_ols requires finite inputs");

  LinearFit fit;
  fit.slopes = Eigen::VectorXd::Zero(p);
  const double ybar = y.mean();

  if (p == 0) {
    fit.intercept = ybar;
    fit.fitted = Eigen::VectorXd::Constant(n, ybar);
    fit.residuals = y.array() - ybar;
    return fit;
  }

  const Eigen::RowVectorXd xbar = x.colwise().mean();
  Eigen::MatrixXd xc = x.rowwise() - xbar;

  // Rank from the singular spectrum of the centered design.
  constexpr double kRankTol = 1e-10;
  Eigen::Index rank = 0;
  {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(xc);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > kRankTol * smax && sv(i) > 0.0) ++rank;
  }
  if (rank == 0 && n < 2)
    throw Error(ErrorKind::DegenerateDesign, "no usable columns and n < 2");

  // Column selection: keep the first `rank` pivots of a column-pivoted QR.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivqr(xc);
  std::vector<Eigen::Index> keep;
  keep.reserve(rank);
  const auto& perm = pivqr.colsPermutation().indices();
  for (Eigen::Index i = 0; i < rank; ++i) keep.push_back(perm(i));
  std::sort(keep.begin(), keep.end());
  std::vector<char> kept(p, 0);
  for (Eigen::Index c : keep) kept[static_cast<std::size_t>(c)] = 1;
  for (Eigen::Index c = 0; c < p; ++c)
    if (!kept[static_cast<std::size_t>(c)]) fit.dropped_columns.push_back(c);
  fit.rank = rank;

  if (rank > 0) {
    Eigen::MatrixXd xk(n, rank);
    for (Eigen::Index j = 0; j < rank; ++j) xk.col(j) = xc.col(keep[j]);
    const Eigen::VectorXd yc = y.array() - ybar;
    const Eigen::VectorXd beta = xk.householderQr().solve(yc);
    for (Eigen::Index j = 0; j < rank; ++j) fit.slopes(keep[j]) = beta(j);
  }

  fit.intercept = ybar - xbar.dot(fit.slopes);
  fit.fitted = (x * fit.slopes).array() + fit.intercept;
  fit.residuals = y - fit.fitted;
  return fit;
}

// Prediction on new rows; dropped columns contribute nothing (zero slope).
inline Eigen::VectorXd predict_linear(const LinearFit& fit, const Eigen::MatrixXd& x) {
  if (x.cols() != fit.slopes.size())
    throw Error(ErrorKind::LengthMismatch, "prediction design width mismatch");
  return (x * fit.slopes).array() + fit.intercept;
}

}  // namespace cate
