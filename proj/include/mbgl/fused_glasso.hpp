#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/fused_chain.hpp"
#include "mbgl/glasso.hpp"
#include "mbgl/linalg.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// L coupled graphical lasso problems with a sequential fusion penalty:
///   sum_l [-log det Q_l + tr(Psi_l Q_l)]
///     + lambda sum_l sum_{i!=j} |(Q_l)_ij| + rho sum_{l<L} sum_{i!=j} |(Q_l)_ij - (Q_{l+1})_ij|.
struct FmglProblem {
  std::vector<Matrix> psi_blocks;
  double lambda = 0.0;
  double rho = 0.0;
};

struct FmglOptions {
  double tol = 1e-6;
  std::size_t max_iterations = 500;
};

struct FmglResult {
  PrecisionBlockSet q;
  std::vector<Matrix> w;
  double objective = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::optional<std::string> diagnostic;
};

inline double penalty_value(const std::vector<Matrix>& blocks, double lambda, double rho) {
  double sparsity = 0.0, fusion = 0.0;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    sparsity += blocks[l].cwiseAbs().sum() - blocks[l].diagonal().cwiseAbs().sum();
    if (l + 1 < blocks.size()) {
      const Matrix diff = blocks[l] - blocks[l + 1];
      fusion += diff.cwiseAbs().sum() - diff.diagonal().cwiseAbs().sum();
    }
  }
  return (lambda == 0.0 ? 0.0 : lambda * sparsity) + (rho == 0.0 ? 0.0 : rho * fusion);
}

inline double penalty_value(const PrecisionBlockSet& q, double lambda, double rho) {
  return penalty_value(q.blocks(), lambda, rho);
}

namespace detail {

inline double fmgl_smooth(const FmglProblem& problem, const std::vector<Matrix>& blocks,
                          std::vector<Matrix>* inverses = nullptr) {
  std::vector<double> parts(blocks.size());
  std::vector<char> ok(blocks.size(), 1);
  if (inverses) inverses->resize(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t l) {
    auto llt = linalg::try_cholesky(blocks[l]);
    if (!llt) {
      ok[l] = 0;
      return;
    }
    parts[l] = -linalg::log_det(*llt) + problem.psi_blocks[l].cwiseProduct(blocks[l]).sum();
    if (inverses) (*inverses)[l] = linalg::inverse(*llt);
  });
  double total = 0.0;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    if (!ok[l]) return std::numeric_limits<double>::infinity();
    total += parts[l];
  }
  return total;
}

inline void validate_fmgl_problem(const FmglProblem& problem) {
  require(!problem.psi_blocks.empty(), ErrorCode::DimensionMismatch, "need at least one level");
  require(std::isfinite(problem.lambda) && problem.lambda >= 0.0 && std::isfinite(problem.rho) &&
              problem.rho >= 0.0,
          ErrorCode::InvalidArgument, "penalties must be finite and >= 0");
  const auto p = problem.psi_blocks.front().rows();
  for (std::size_t l = 0; l < problem.psi_blocks.size(); ++l) {
    GlassoProblem level{problem.psi_blocks[l], problem.lambda, false};
    require(level.psi.rows() == p, ErrorCode::DimensionMismatch, "psi blocks differ in size");
    validate_glasso_problem(level);
    if (problem.lambda == 0.0 && problem.rho == 0.0 && !linalg::try_cholesky(level.psi)) {
      fail(ErrorCode::UnboundedProblem,
           "unpenalized problem with singular psi at level " + std::to_string(l + 1));
    }
  }
}

}  // namespace detail

inline double fmgl_objective(const FmglProblem& problem, const std::vector<Matrix>& blocks) {
  return detail::fmgl_smooth(problem, blocks) + penalty_value(blocks, problem.lambda, problem.rho);
}

/// Max over coordinates of the distance from zero to the subdifferential.
/// Off-diagonal coordinates are coupled along the level chain, so each
/// (i, j) chain is certified jointly by fused_chain_residual().
inline double fmgl_residual(const FmglProblem& problem, const std::vector<Matrix>& blocks,
                            const std::vector<Matrix>& inverses) {
  const std::size_t levels = blocks.size();
  const auto p = blocks.front().rows();
  double worst = 0.0;
  std::vector<double> g(levels), x(levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (Eigen::Index i = 0; i < p; ++i)
      worst = std::max(worst, std::abs(problem.psi_blocks[l](i, i) - inverses[l](i, i)));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      for (std::size_t l = 0; l < levels; ++l) {
        g[l] = problem.psi_blocks[l](i, j) - inverses[l](i, j);
        x[l] = blocks[l](i, j);
      }
      worst = std::max(worst, fused_chain_residual(g, x, problem.lambda, problem.rho));
    }
  }
  return worst;
}

/// Blockwise proximal Newton for the fused problem. The quadratic model of
/// the smooth part is separable across levels; each off-diagonal coordinate
/// (i, j) is coupled only along its level chain, so the coordinate step for
/// that chain is an exact weighted fused-lasso solve. Diagonals take 1-D
/// Newton steps. An Armijo search on the full objective keeps every block PD.
inline FmglResult fmgl_solve(const FmglProblem& problem, const std::optional<PrecisionBlockSet>& init,
                             const FmglOptions& options = {}) {
  detail::validate_fmgl_problem(problem);
  const std::size_t levels = problem.psi_blocks.size();
  const auto p = problem.psi_blocks.front().rows();
  const double lambda = problem.lambda, rho = problem.rho;

  FmglProblem sym = problem;
  for (auto& psi : sym.psi_blocks) psi = linalg::symmetrized(psi);

  std::vector<Matrix> q(levels);
  if (init) {
    require(init->levels() == levels && init->p() == std::size_t(p), ErrorCode::DimensionMismatch,
            "fmgl init has wrong shape");
    q = init->blocks();
  } else {
    for (std::size_t l = 0; l < levels; ++l)
      q[l] = sym.psi_blocks[l].diagonal().cwiseInverse().asDiagonal();
  }
  std::vector<Matrix> w;
  double smooth = detail::fmgl_smooth(sym, q, &w);
  if (!std::isfinite(smooth)) fail(ErrorCode::NotPositiveDefinite, "fmgl init is not PD");
  double f = smooth + penalty_value(q, lambda, rho);

  FmglResult result;
  constexpr double kArmijo = 1e-3;
  std::vector<Matrix> x(levels), u(levels), g(levels);
  std::vector<double> chain_a(levels), chain_z(levels), chain_c(levels), chain_g(levels),
      chain_x(levels);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> free_set;
  FusedChainSolver chain;

  for (std::size_t iter = 0;; ++iter) {
    result.iterations = iter;
    result.residual = fmgl_residual(sym, q, w);
    if (result.residual <= options.tol) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iterations) {
      result.diagnostic = "MaxIterationsExceeded: residual " + std::to_string(result.residual) +
                          " after " + std::to_string(iter) + " Newton steps";
      break;
    }

    for (std::size_t l = 0; l < levels; ++l) {
      g[l] = sym.psi_blocks[l] - w[l];
      x[l] = q[l];
      u[l] = Matrix::Zero(p, p);
    }
    free_set.clear();
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        bool any_nonzero = false;
        for (std::size_t l = 0; l < levels; ++l) {
          chain_g[l] = g[l](i, j);
          chain_x[l] = q[l](i, j);
          any_nonzero = any_nonzero || chain_x[l] != 0.0;
        }
        if (any_nonzero || fused_chain_residual(chain_g, chain_x, lambda, rho) > 0.0)
          free_set.emplace_back(i, j);
      }
    }

    const std::size_t max_sweeps = 10 + iter;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      double max_step = 0.0, max_x = 0.0;
      for (std::size_t l = 0; l < levels; ++l) {
        const Matrix& wl = w[l];
        for (Eigen::Index i = 0; i < p; ++i) {
          const double a = wl(i, i) * wl(i, i);
          const double b = g[l](i, i) + wl.row(i).dot(u[l].col(i));
          const double mu = -b / a;
          if (mu != 0.0) {
            x[l](i, i) += mu;
            u[l].row(i) += mu * wl.row(i);
            max_step = std::max(max_step, std::abs(mu));
          }
        }
      }
      for (const auto& [i, j] : free_set) {
        for (std::size_t l = 0; l < levels; ++l) {
          const Matrix& wl = w[l];
          const double a = wl(i, j) * wl(i, j) + wl(i, i) * wl(j, j);
          const double b = g[l](i, j) + wl.row(i).dot(u[l].col(j));
          chain_a[l] = a;
          chain_c[l] = x[l](i, j);
          chain_z[l] = chain_c[l] - b / a;
        }
        const auto next = chain.solve(chain_a, chain_z, lambda, rho);
        for (std::size_t l = 0; l < levels; ++l) {
          const double mu = next[l] - chain_c[l];
          if (mu == 0.0) continue;
          x[l](i, j) = next[l];
          x[l](j, i) = next[l];
          u[l].row(i) += mu * w[l].row(j);
          u[l].row(j) += mu * w[l].row(i);
          max_step = std::max(max_step, std::abs(mu));
        }
      }
      for (const auto& xl : x) max_x = std::max(max_x, xl.cwiseAbs().maxCoeff());
      if (max_step <= 1e-12 * (1.0 + max_x)) break;
    }

    double delta = penalty_value(x, lambda, rho) - penalty_value(q, lambda, rho);
    std::vector<Matrix> d(levels);
    for (std::size_t l = 0; l < levels; ++l) {
      d[l] = x[l] - q[l];
      delta += g[l].cwiseProduct(d[l]).sum();
    }

    bool accepted = false;
    double alpha = 1.0;
    std::vector<Matrix> candidate(levels), cand_w;
    for (int halving = 0; halving < 60; ++halving, alpha *= 0.5) {
      for (std::size_t l = 0; l < levels; ++l)
        candidate[l] = alpha == 1.0 ? x[l] : Matrix(q[l] + alpha * d[l]);
      const double cand_smooth = detail::fmgl_smooth(sym, candidate, &cand_w);
      if (!std::isfinite(cand_smooth)) continue;
      const double f_new = cand_smooth + penalty_value(candidate, lambda, rho);
      if (f_new <= f + kArmijo * alpha * delta) {
        q.swap(candidate);
        w.swap(cand_w);
        f = f_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.residual = fmgl_residual(sym, q, w);
      result.converged = result.residual <= options.tol;
      if (!result.converged)
        result.diagnostic = "line search stalled at residual " + std::to_string(result.residual);
      break;
    }
  }
  result.q = PrecisionBlockSet(std::move(q));
  result.w = std::move(w);
  result.objective = f;
  return result;
}

}  // namespace mbgl
