#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/linalg.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

inline double soft_threshold(double z, double threshold) {
  if (z > threshold) return z - threshold;
  if (z < -threshold) return z + threshold;
  return 0.0;
}

/// min_Q  -log det Q + tr(Psi Q) + lambda sum_{i != j} |Q_ij|
/// (plus lambda sum_i |Q_ii| when penalize_diagonal is set).
struct GlassoProblem {
  Matrix psi;
  double lambda = 0.0;
  bool penalize_diagonal = false;
};

struct GlassoOptions {
  double tol = 1e-6;
  std::size_t max_iterations = 500;
};

struct GlassoResult {
  Matrix q;
  Matrix w;  // q^-1
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Set when the solver stopped before reaching tol (MaxIterationsExceeded
  /// or a stalled line search); q is then the best iterate found.
  std::optional<std::string> diagnostic;
};

inline double l1_penalty(const Matrix& q, double lambda, bool penalize_diagonal) {
  if (lambda == 0.0) return 0.0;
  double off = q.cwiseAbs().sum() - q.diagonal().cwiseAbs().sum();
  if (penalize_diagonal) off += q.diagonal().cwiseAbs().sum();
  return lambda * off;
}

/// Objective value, or +infinity outside the PD cone.
inline double glasso_objective(const GlassoProblem& problem, const Matrix& q) {
  const auto llt = linalg::try_cholesky(q);
  if (!llt) return std::numeric_limits<double>::infinity();
  return -linalg::log_det(*llt) + (problem.psi.cwiseProduct(q)).sum() +
         l1_penalty(q, problem.lambda, problem.penalize_diagonal);
}

/// Max-norm distance from zero to the subdifferential at q (w = q^-1).
inline double glasso_kkt_residual(const GlassoProblem& problem, const Matrix& q, const Matrix& w) {
  const Matrix g = problem.psi - w;
  const auto p = q.rows();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const bool penalized = i != j || problem.penalize_diagonal;
      const double lam = penalized ? problem.lambda : 0.0;
      double r;
      if (q(i, j) != 0.0 || lam == 0.0) {
        r = std::abs(g(i, j) + lam * (q(i, j) > 0.0 ? 1.0 : (q(i, j) < 0.0 ? -1.0 : 0.0)));
      } else {
        r = std::max(0.0, std::abs(g(i, j)) - lam);
      }
      worst = std::max(worst, r);
    }
  }
  return worst;
}

namespace detail {

inline void validate_glasso_problem(const GlassoProblem& problem) {
  const Matrix& psi = problem.psi;
  require(psi.rows() >= 1 && psi.rows() == psi.cols(), ErrorCode::DimensionMismatch,
          "psi must be square");
  require(psi.allFinite(), ErrorCode::InvalidArgument, "psi must be finite");
  require(linalg::max_asymmetry(psi) <= 1e-10 * std::max(1.0, psi.cwiseAbs().maxCoeff()),
          ErrorCode::InvalidArgument, "psi must be symmetric");
  require(std::isfinite(problem.lambda) && problem.lambda >= 0.0, ErrorCode::InvalidArgument,
          "lambda must be finite and >= 0");
  const double diag_shift = problem.penalize_diagonal ? problem.lambda : 0.0;
  for (Eigen::Index i = 0; i < psi.rows(); ++i) {
    if (!(psi(i, i) + diag_shift > 0.0)) {
      fail(ErrorCode::UnboundedProblem,
           "psi has nonpositive diagonal entry " + std::to_string(i));
    }
  }
}

}  // namespace detail

/// Proximal Newton graphical lasso in the style of QUIC: at each outer step
/// the Newton direction of the smooth part is found by coordinate descent
/// over the free set (nonzeros plus coordinates whose gradient exceeds the
/// penalty), then an Armijo line search keeps the iterate positive definite.
inline GlassoResult glasso_solve(const GlassoProblem& problem, const std::optional<Matrix>& init = {},
                                 const GlassoOptions& options = {}) {
  detail::validate_glasso_problem(problem);
  const Matrix psi = linalg::symmetrized(problem.psi);
  const auto p = psi.rows();
  const double lambda = problem.lambda;
  const double diag_lambda = problem.penalize_diagonal ? lambda : 0.0;

  GlassoResult result;
  if (lambda == 0.0) {
    auto llt = linalg::try_cholesky(psi);
    if (!llt) fail(ErrorCode::UnboundedProblem, "lambda = 0 with a singular psi");
    result.q = linalg::inverse(*llt);
    result.w = psi;
    result.objective = glasso_objective(problem, result.q);
    result.kkt_residual = glasso_kkt_residual(problem, result.q, linalg::spd_inverse(result.q, "Q"));
    result.converged = true;
    return result;
  }

  Matrix q;
  if (init) {
    require(init->rows() == p && init->cols() == p, ErrorCode::DimensionMismatch,
            "init has wrong shape");
    q = linalg::symmetrized(*init);
  } else {
    q = (psi.diagonal().array() + diag_lambda).inverse().matrix().asDiagonal();
  }
  auto llt = linalg::try_cholesky(q);
  if (!llt) fail(ErrorCode::NotPositiveDefinite, "glasso init is not positive definite");
  Matrix w = linalg::inverse(*llt);
  double f = glasso_objective(problem, q);

  constexpr double kArmijo = 1e-3;
  Matrix x(p, p), u(p, p);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> free_set;

  for (std::size_t iter = 0;; ++iter) {
    result.iterations = iter;
    result.kkt_residual = glasso_kkt_residual(problem, q, w);
    if (result.kkt_residual <= options.tol) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iterations) {
      result.diagnostic = "MaxIterationsExceeded: KKT residual " +
                          std::to_string(result.kkt_residual) + " after " +
                          std::to_string(iter) + " Newton steps";
      break;
    }

    const Matrix g = psi - w;
    free_set.clear();
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < j; ++i)
        if (q(i, j) != 0.0 || std::abs(g(i, j)) > lambda) free_set.emplace_back(i, j);

    // Coordinate descent on the quadratic model; x = q + d, u = d w.
    x = q;
    u.setZero();
    const std::size_t max_sweeps = 10 + iter;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      double max_step = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        const double a = w(i, i) * w(i, i);
        const double b = g(i, i) + w.row(i).dot(u.col(i));
        const double c = x(i, i);
        const double next = soft_threshold(c - b / a, diag_lambda / a);
        const double mu = next - c;
        if (mu != 0.0) {
          x(i, i) = next;
          u.row(i) += mu * w.row(i);
          max_step = std::max(max_step, std::abs(mu));
        }
      }
      for (const auto& [i, j] : free_set) {
        const double a = w(i, j) * w(i, j) + w(i, i) * w(j, j);
        const double b = g(i, j) + w.row(i).dot(u.col(j));
        const double c = x(i, j);
        const double next = soft_threshold(c - b / a, lambda / a);
        const double mu = next - c;
        if (mu != 0.0) {
          x(i, j) = next;
          x(j, i) = next;
          u.row(i) += mu * w.row(j);
          u.row(j) += mu * w.row(i);
          max_step = std::max(max_step, std::abs(mu));
        }
      }
      if (max_step <= 1e-12 * (1.0 + x.cwiseAbs().maxCoeff())) break;
    }

    const Matrix d = x - q;
    const double delta = g.cwiseProduct(d).sum() + l1_penalty(x, lambda, problem.penalize_diagonal) -
                         l1_penalty(q, lambda, problem.penalize_diagonal);
    bool accepted = false;
    double alpha = 1.0;
    for (int halving = 0; halving < 60; ++halving, alpha *= 0.5) {
      Matrix candidate = alpha == 1.0 ? x : Matrix(q + alpha * d);
      auto cand_llt = linalg::try_cholesky(candidate);
      if (!cand_llt) continue;
      const double f_new = -linalg::log_det(*cand_llt) + psi.cwiseProduct(candidate).sum() +
                           l1_penalty(candidate, lambda, problem.penalize_diagonal);
      if (f_new <= f + kArmijo * alpha * delta) {
        q = std::move(candidate);
        w = linalg::inverse(*cand_llt);
        f = f_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.kkt_residual = glasso_kkt_residual(problem, q, w);
      result.converged = result.kkt_residual <= options.tol;
      if (!result.converged) {
        result.diagnostic = "line search stalled at KKT residual " +
                            std::to_string(result.kkt_residual);
      }
      break;
    }
  }
  result.q = std::move(q);
  result.w = std::move(w);
  result.objective = f;
  return result;
}

}  // namespace mbgl
