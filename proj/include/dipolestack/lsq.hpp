#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "dipolestack/core.hpp"

namespace dipolestack::lsq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Options {
  int max_iterations = 500;
  double relative_tolerance = 1e-12;  ///< on the cost decrease and on the step
  double gradient_tolerance = 1e-14;
  double initial_damping = 1e-3;
  bool scale_covariance = true;  ///< multiply by the reduced chi^2 (unknown data errors)
};

struct Result {
  Vector params;
  Matrix covariance;
  Vector standard_errors;
  double cost = 0.0;  ///< sum of squared residuals
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Residuals r(x) and their Jacobian J(x) (rows = residuals). A residual
/// function may return non-finite values to mark x as inadmissible; such
/// steps are rejected.
using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;
/// Maps a trial point back into the admissible box (identity by default).
using ProjectFn = std::function<void(Vector&)>;

/// Central-difference Jacobian with a relative step.
inline JacobianFn numeric_jacobian(ResidualFn r, double rel_step = 1e-6) {
  return [r = std::move(r), rel_step](const Vector& x) {
    const Vector r0 = r(x);
    Matrix J(r0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double h = rel_step * std::max(1.0, std::abs(x[k]));
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      J.col(k) = (r(xp) - r(xm)) / (2.0 * h);
    }
    return J;
  };
}

/// Damped Gauss-Newton (Levenberg-Marquardt with diagonal scaling).
/// Throws FitError carrying the last residual norm when the iteration budget
/// runs out before the tolerances are met.
inline Result levenberg_marquardt(const ResidualFn& residuals, const JacobianFn& jacobian, Vector x,
                                  const Options& opt = {}, const ProjectFn& project = {}) {
  auto cost_of = [](const Vector& r) {
    return r.allFinite() ? r.squaredNorm() : std::numeric_limits<double>::infinity();
  };
  Vector r = residuals(x);
  double cost = cost_of(r);
  if (!std::isfinite(cost)) throw FitError("initial parameters give non-finite residuals", cost);
  double lambda = opt.initial_damping;
  Result res;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Matrix J = jacobian(x);
    const Matrix A = J.transpose() * J;
    const Vector g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance * std::max(1.0, cost)) {
      res.converged = true;
      break;
    }
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Matrix M = A;
      for (Eigen::Index k = 0; k < M.rows(); ++k) M(k, k) += lambda * std::max(A(k, k), 1e-12);
      const Vector step = M.ldlt().solve(-g);
      Vector xn = x + step;
      if (project) project(xn);
      const Vector rn = residuals(xn);
      const double cn = cost_of(rn);
      if (cn < cost) {
        const double drop = cost - cn;
        const double dx = (xn - x).norm();
        x = xn;
        r = rn;
        const double prev = cost;
        cost = cn;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (drop <= opt.relative_tolerance * prev || dx <= opt.relative_tolerance * (x.norm() + 1e-12)) {
          res.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No admissible downhill step at any damping: a (constrained) minimum.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  if (!res.converged) {
    throw FitError("least squares did not converge in " + std::to_string(opt.max_iterations) + " iterations",
                   std::sqrt(cost));
  }
  res.iterations = it;
  res.params = x;
  res.cost = cost;
  res.residual_norm = std::sqrt(cost);
  const Matrix J = jacobian(x);
  const Matrix A = J.transpose() * J;
  res.covariance = A.completeOrthogonalDecomposition().pseudoInverse();
  const auto dof = static_cast<double>(r.size() - x.size());
  if (opt.scale_covariance && dof > 0) res.covariance *= cost / dof;
  res.standard_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

}  // namespace dipolestack::lsq
