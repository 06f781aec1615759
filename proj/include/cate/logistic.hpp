#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "cate/error.hpp"

namespace cate {

// exp(eta) / (1 + exp(eta)) without overflow on either tail.
inline double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow on either tail.
inline double log1pexp(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

struct LogisticOptions {
  int max_iter = 100;
  double grad_tol = 1e-12;        // max-norm convergence target
  double loss_tol = 1e-12;        // relative loss-change exit ...
  double loss_exit_grad = 1e-8;   // ... only accepted once the gradient is this small
  double separation_linpred = 30.0;
  double separation_loss_floor = 1e-8;
  double ridge_factor = 1e-8;     // scaled by mean Hessian diagonal
  int max_halvings = 50;
};

struct LogisticFit {
  Eigen::VectorXd theta;  // p+1 coefficients, intercept first
  bool converged = false;
  int iterations = 0;
  double loss = 0.0;      // mean negative log-likelihood at theta
  double grad_max_norm = 0.0;
  double max_abs_linpred = 0.0;   // over training rows at the final theta
  bool separation_flag = false;
  bool ridge_used = false;
  std::vector<double> loss_trace;  // accepted iterates; nonincreasing
};

// Mean negative log-likelihood and its gradient at theta. xtilde carries the
// intercept column; loss = n^-1 sum{ -y*eta + log(1+exp(eta)) }.
inline std::pair<double, Eigen::VectorXd> logistic_loss_grad(
    const Eigen::VectorXd& theta, const Eigen::MatrixXd& xtilde,
    const Eigen::VectorXd& y) {
  if (!theta.allFinite() || !xtilde.allFinite() || !y.allFinite())
    throw Error(ErrorKind::NonFiniteInput, "logistic_loss_grad requires finite inputs");
  if (xtilde.rows() != y.size() || xtilde.cols() != theta.size())
    throw Error(ErrorKind::LengthMismatch, "logistic_loss_grad shape mismatch");
  const Eigen::Index n = y.size();
  const Eigen::VectorXd eta = xtilde * theta;
  double loss = 0.0;
  Eigen::VectorXd resid(n);  // mu - y
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += -y(i) * eta(i) + log1pexp(eta(i));
    resid(i) = expit(eta(i)) - y(i);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return {loss * inv_n, (xtilde.transpose() * resid) * inv_n};
}

// Newton-Raphson with step-halving on the mean negative log-likelihood.
// Converges when the gradient max-norm reaches grad_tol, or when the loss
// stalls (relative change <= loss_tol) with the gradient already below
// loss_exit_grad AND no longer contracting; the contraction veto matters
// because near the optimum the loss flattens to double rounding well before
// the score does, and the first-order conditions must stay tight enough that
// within-arm residual means vanish to ~grad_tol. Separation is flagged
// when any accepted iterate pushes |linear predictor| past the threshold or
// drives the loss to its perfect-fit floor; the flag never aborts the fit.
// A singular Hessian is retried once with a trace-scaled ridge.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const LogisticOptions& opt = {}) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = x.cols();
  if (n == 0) throw Error(ErrorKind::DegenerateDesign, "empty design");
  if (x.size() > 0 && x.rows() != n)
    throw Error(ErrorKind::LengthMismatch, "design rows differ from outcome length");
  if (!y.allFinite() || (x.size() > 0 && !x.allFinite()))
    throw Error(ErrorKind::NonFiniteInput, "fit_logistic requires finite inputs");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw Error(ErrorKind::NonBinaryValue, "logistic outcome must be 0/1");

  Eigen::MatrixXd xtilde(n, p + 1);
  xtilde.col(0).setOnes();
  if (p > 0) xtilde.rightCols(p) = x;

  LogisticFit fit;
  fit.theta = Eigen::VectorXd::Zero(p + 1);
  auto [loss, grad] = logistic_loss_grad(fit.theta, xtilde, y);
  fit.loss_trace.push_back(loss);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    fit.grad_max_norm = grad.lpNorm<Eigen::Infinity>();
    if (fit.grad_max_norm <= opt.grad_tol) {
      fit.converged = true;
      break;
    }

    // Hessian: n^-1 X~' W X~ with W = mu(1-mu).
    Eigen::VectorXd eta = xtilde * fit.theta;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = expit(eta(i));
      w(i) = mu * (1.0 - mu);
    }
    Eigen::MatrixXd hess =
        (xtilde.transpose() * w.asDiagonal() * xtilde) * inv_n;

    Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(hess).solve(-grad);
    bool bad = !step.allFinite() ||
               (hess * step + grad).norm() > 1e-6 * (1.0 + grad.norm());
    if (bad) {
      const double lambda =
          opt.ridge_factor * (hess.trace() / static_cast<double>(p + 1)) +
          1e-300;
      Eigen::MatrixXd ridged = hess;
      ridged.diagonal().array() += lambda;
      step = Eigen::LDLT<Eigen::MatrixXd>(ridged).solve(-grad);
      fit.ridge_used = true;
      if (!step.allFinite())
        throw Error(ErrorKind::SingularHessian,
                    "Hessian unusable even with ridge fallback");
    }

    // Step-halving: accept the first candidate that strictly lowers the loss.
    // Inside the quadratic basin (gradient already small) the loss is flat to
    // double rounding over a theta-window of ~sqrt(eps) while the full Newton
    // step still contracts the score, so there a halved gradient counts as
    // progress; without it first-order precision would be capped near
    // sqrt(eps) instead of grad_tol. The recorded loss never increases: a
    // polish step whose loss ties within rounding keeps the incumbent value.
    bool accepted = false;
    double new_loss = loss;
    Eigen::VectorXd new_grad;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      const Eigen::VectorXd cand = fit.theta + step / std::pow(2.0, h);
      auto [l, g] = logistic_loss_grad(cand, xtilde, y);
      const bool descent = std::isfinite(l) && l < loss;
      const bool polish = h == 0 && std::isfinite(l) &&
                          fit.grad_max_norm <= 1e-6 &&
                          g.lpNorm<Eigen::Infinity>() < 0.5 * fit.grad_max_norm;
      if (descent || polish) {
        fit.theta = cand;
        new_loss = std::min(l, loss);
        new_grad = std::move(g);
        accepted = true;
        break;
      }
    }
    ++fit.iterations;
    if (!accepted) {
      // No descent direction left; settle at the current point.
      fit.converged = fit.grad_max_norm <= opt.loss_exit_grad;
      break;
    }

    const double max_lp = (xtilde * fit.theta).cwiseAbs().maxCoeff();
    if (max_lp > opt.separation_linpred) fit.separation_flag = true;
    fit.loss_trace.push_back(new_loss);

    const double prev_grad = fit.grad_max_norm;
    const double loss_change = loss - new_loss;
    loss = new_loss;
    grad = std::move(new_grad);
    fit.grad_max_norm = grad.lpNorm<Eigen::Infinity>();
    // The loss-stall exit is for fits whose score has genuinely stopped
    // moving; while the step still halves the gradient, keep iterating so
    // well-posed fits run down to grad_tol instead of parking at the loss
    // resolution floor.
    const bool contracting = fit.grad_max_norm < 0.5 * prev_grad;
    if (fit.grad_max_norm <= opt.grad_tol ||
        (!contracting && loss_change <= opt.loss_tol * (1.0 + std::fabs(loss)) &&
         fit.grad_max_norm <= opt.loss_exit_grad)) {
      fit.converged = true;
      break;
    }
  }

  fit.loss = loss;
  fit.grad_max_norm = grad.lpNorm<Eigen::Infinity>();
  fit.max_abs_linpred = (xtilde * fit.theta).cwiseAbs().maxCoeff();
  if (fit.max_abs_linpred > opt.separation_linpred ||
      fit.loss <= opt.separation_loss_floor)
    fit.separation_flag = true;
  return fit;
}

// Fitted probabilities on new rows, clamped to the open interval so callers
// can take logs and odds safely. The clamp sits at 1e-15, far below any
// tolerance used downstream.
inline Eigen::VectorXd predict_logistic(const LogisticFit& fit,
                                        const Eigen::MatrixXd& x) {
  if (x.cols() + 1 != fit.theta.size())
    throw Error(ErrorKind::LengthMismatch, "prediction design width mismatch");
  const Eigen::Index n = x.rows();
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = fit.theta(0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * fit.theta(j + 1);
    mu(i) = std::min(1.0 - 1e-15, std::max(1e-15, expit(eta)));
  }
  return mu;
}

}  // namespace cate
