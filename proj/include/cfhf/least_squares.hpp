#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) for small, smooth weighted
// least-squares problems with central-difference Jacobians.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfhf/errors.hpp"

namespace cfhf {

struct LeastSquaresOptions {
  int max_iterations = 200;
  double rel_chi2_tol = 1e-12;
  double step_tol = 1e-10;
  double jacobian_rel_step = 1e-6;
  double initial_damping = 1e-3;
  double damping_factor = 10.0;
  double max_damping = 1e16;
  double singular_tol = 1e-13;  // min/max eigenvalue of the scaled normal matrix
};

enum class SingularPolicy { Throw, Report };

struct LeastSquaresProblem {
  // Weighted residuals (measured - model) / sigma.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  std::vector<std::string> names;
  // Typical magnitude of each parameter; finite-difference steps are
  // rel_step * max(|x|, scale).
  Eigen::VectorXd scale;
  Eigen::VectorXd lower;  // empty = unbounded
  Eigen::VectorXd upper;
  // Optional extra feasibility test; rejected trial steps raise the damping.
  std::function<bool(const Eigen::VectorXd&)> admissible;
  SingularPolicy on_singular = SingularPolicy::Throw;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // (J^T J)^-1 of the weighted residuals
  Eigen::VectorXd errors;
  double chi2 = 0.0;
  int dof = 0;
  Eigen::VectorXd residuals;
  int iterations = 0;
  bool converged = false;
  std::vector<double> chi2_history;  // after every accepted step
  std::optional<Eigen::VectorXd> singular_direction;
};

namespace detail {

inline Eigen::VectorXd clamp_to_bounds(const LeastSquaresProblem& pb, Eigen::VectorXd x) {
  if (pb.lower.size() == x.size()) x = x.cwiseMax(pb.lower);
  if (pb.upper.size() == x.size()) x = x.cwiseMin(pb.upper);
  return x;
}

inline double fd_step(const LeastSquaresProblem& pb, const LeastSquaresOptions& opt,
                      const Eigen::VectorXd& x, Eigen::Index k) {
  const double s = pb.scale.size() == x.size() ? pb.scale(k) : 1.0;
  return opt.jacobian_rel_step * std::max(std::abs(x(k)), s);
}

inline Eigen::MatrixXd central_jacobian(const LeastSquaresProblem& pb, const LeastSquaresOptions& opt,
                                        const Eigen::VectorXd& x, Eigen::Index n_res) {
  Eigen::MatrixXd jac(n_res, x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = fd_step(pb, opt, x, k);
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(k) += h;
    xm(k) -= h;
    jac.col(k) = (pb.residuals(xp) - pb.residuals(xm)) / (2.0 * h);
  }
  return jac;
}

inline std::string describe_direction(const LeastSquaresProblem& pb, const Eigen::VectorXd& dir) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index k = 0; k < dir.size(); ++k) {
    if (k) os << ", ";
    const auto idx = static_cast<std::size_t>(k);
    os << (idx < pb.names.size() ? pb.names[idx] : "p" + std::to_string(k)) << "=" << dir(k);
  }
  os << "]";
  return os.str();
}

struct NormalAnalysis {
  Eigen::MatrixXd covariance;
  std::optional<Eigen::VectorXd> null_direction;
};

// Inverts J^T J with diagonal scaling; flags a near-null direction.
inline NormalAnalysis analyze_normal(const Eigen::MatrixXd& jac, double tol) {
  const Eigen::MatrixXd n = jac.transpose() * jac;
  const Eigen::Index p = n.rows();
  Eigen::VectorXd d(p);
  for (Eigen::Index k = 0; k < p; ++k) d(k) = n(k, k) > 0.0 ? 1.0 / std::sqrt(n(k, k)) : 1.0;
  const Eigen::MatrixXd ns = d.asDiagonal() * n * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ns);
  const Eigen::VectorXd ev = es.eigenvalues();
  NormalAnalysis out;
  Eigen::VectorXd inv(p);
  const double top = std::max(ev.maxCoeff(), 0.0);
  for (Eigen::Index k = 0; k < p; ++k) {
    const bool zero_col = n(k, k) <= 0.0;
    if (zero_col && !out.null_direction) {
      out.null_direction = Eigen::VectorXd::Unit(p, k);
    }
  }
  for (Eigen::Index k = 0; k < p; ++k) {
    if (ev(k) <= tol * top) {
      if (!out.null_direction) {
        Eigen::VectorXd v = d.asDiagonal() * es.eigenvectors().col(k);
        out.null_direction = v / v.norm();
      }
      inv(k) = std::numeric_limits<double>::infinity();
    } else {
      inv(k) = 1.0 / ev(k);
    }
  }
  if (!out.null_direction) {
    out.covariance = d.asDiagonal() * es.eigenvectors() * inv.asDiagonal() *
                     es.eigenvectors().transpose() * d.asDiagonal();
  } else {
    // Pseudo-inverse on the determined subspace; undetermined parameters get
    // infinite variance.
    Eigen::VectorXd pinv = inv;
    for (Eigen::Index k = 0; k < p; ++k) if (!std::isfinite(pinv(k))) pinv(k) = 0.0;
    out.covariance = d.asDiagonal() * es.eigenvectors() * pinv.asDiagonal() *
                     es.eigenvectors().transpose() * d.asDiagonal();
    const Eigen::VectorXd& dir = *out.null_direction;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (std::abs(dir(k)) > 1e-3) out.covariance(k, k) = std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

}  // namespace detail

inline LeastSquaresResult levenberg_marquardt(const LeastSquaresProblem& pb, const Eigen::VectorXd& x0,
                                              const LeastSquaresOptions& opt = {}) {
  if (!pb.residuals) throw InvalidArgument("least squares: no residual function");
  Eigen::VectorXd x = detail::clamp_to_bounds(pb, x0);
  if (pb.admissible && !pb.admissible(x)) throw InvalidArgument("least squares: initial point not admissible");
  Eigen::VectorXd r = pb.residuals(x);
  const Eigen::Index n_res = r.size();
  const Eigen::Index n_par = x.size();
  if (n_res < n_par) {
    throw InvalidArgument("least squares: " + std::to_string(n_res) + " residuals for " +
                          std::to_string(n_par) + " parameters");
  }
  if (!r.allFinite()) throw FitError("least squares: residuals not finite at the initial point");

  LeastSquaresResult out;
  double chi2 = r.squaredNorm();
  out.chi2_history.push_back(chi2);
  double mu = opt.initial_damping;
  Eigen::MatrixXd jac = detail::central_jacobian(pb, opt, x, n_res);

  {
    const auto na = detail::analyze_normal(jac, opt.singular_tol);
    if (na.null_direction && pb.on_singular == SingularPolicy::Throw) {
      throw FitError("singular normal matrix at the initial point; undetermined direction " +
                     detail::describe_direction(pb, *na.null_direction));
    }
  }

  bool converged = chi2 == 0.0;
  int iter = 0;
  while (!converged && iter < opt.max_iterations) {
    ++iter;
    const Eigen::MatrixXd n = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd diag = n.diagonal();
    for (Eigen::Index k = 0; k < n_par; ++k) if (!(diag(k) > 0.0)) diag(k) = 1.0;

    bool accepted = false;
    Eigen::VectorXd step;
    double chi2_new = chi2;
    Eigen::VectorXd x_new, r_new;
    while (mu <= opt.max_damping) {
      Eigen::MatrixXd a = n;
      a.diagonal() += mu * diag;
      step = a.ldlt().solve(-g);
      x_new = detail::clamp_to_bounds(pb, x + step);
      if (!step.allFinite() || (pb.admissible && !pb.admissible(x_new))) {
        mu *= opt.damping_factor;
        continue;
      }
      r_new = pb.residuals(x_new);
      chi2_new = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
      if (chi2_new < chi2) {
        accepted = true;
        break;
      }
      mu *= opt.damping_factor;
    }
    if (!accepted) {
      // No descent direction left at working precision.
      converged = true;
      break;
    }
    const Eigen::VectorXd actual = x_new - x;
    double step_norm = 0.0;
    for (Eigen::Index k = 0; k < n_par; ++k) {
      const double s = pb.scale.size() == n_par ? pb.scale(k) : 1.0;
      step_norm = std::max(step_norm, std::abs(actual(k)) / std::max(std::abs(x(k)), s));
    }
    const double rel = (chi2 - chi2_new) / std::max(chi2, std::numeric_limits<double>::min());
    x = x_new;
    r = r_new;
    chi2 = chi2_new;
    out.chi2_history.push_back(chi2);
    mu = std::max(mu / opt.damping_factor, 1e-15);
    if (rel < opt.rel_chi2_tol || step_norm < opt.step_tol || chi2 == 0.0) converged = true;
    jac = detail::central_jacobian(pb, opt, x, n_res);
  }
  if (!converged) {
    throw FitError("least squares: iteration cap (" + std::to_string(opt.max_iterations) +
                   ") exceeded, chi2 = " + std::to_string(chi2));
  }

  const auto na = detail::analyze_normal(jac, opt.singular_tol);
  if (na.null_direction && pb.on_singular == SingularPolicy::Throw) {
    throw FitError("singular normal matrix at the optimum; undetermined direction " +
                   detail::describe_direction(pb, *na.null_direction));
  }
  out.params = x;
  out.covariance = na.covariance;
  out.singular_direction = na.null_direction;
  out.errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.chi2 = chi2;
  out.dof = static_cast<int>(n_res - n_par);
  out.residuals = r;
  out.iterations = iter;
  out.converged = true;
  return out;
}

}  // namespace cfhf
