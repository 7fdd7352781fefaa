#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/fused_glasso.hpp"
#include "mbgl/glasso.hpp"
#include "mbgl/likelihood.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/suffstats.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

struct FitReport {
  std::size_t n_dc_iterations = 0;
  /// Penalized reduced objective at the starting point, then after each DC step.
  std::vector<double> objective_trace;
  std::vector<double> relative_change_trace;
  bool converged = false;
  bool mle_mode = false;
  double wall_time_seconds = 0.0;
  PenaltyConfig penalty;
  /// Inner solves that stopped short of their tolerance, one line each.
  std::vector<std::string> notes;
};

struct FitResult {
  PrecisionBlockSet q;
  FitReport report;
};

/// Objective slack allowed between consecutive DC iterates.
inline constexpr double kMonotoneSlack = 1e-8;

inline double penalized_objective(const PrecisionBlockSet& q, const SuffStats& stats,
                                  const NoiseModel& noise, const PenaltyConfig& penalty) {
  return negloglik_reduced(q, stats, noise) + penalty_value(q, penalty.lambda, penalty.rho);
}

namespace detail {

inline PrecisionBlockSet diagonal_start(const SuffStats& stats, const NoiseModel& noise) {
  const auto psi = linearization_blocks(PrecisionBlockSet::identity(stats.p, stats.levels), stats,
                                        noise);
  std::vector<Matrix> blocks(stats.levels);
  for (std::size_t l = 0; l < stats.levels; ++l)
    blocks[l] = psi.psi[l].diagonal().cwiseInverse().asDiagonal();
  return PrecisionBlockSet(std::move(blocks));
}

inline PrecisionBlockSet solve_inner(const LinearizationBlocks& psi, const PenaltyConfig& penalty,
                                     const PrecisionBlockSet& warm, double tol,
                                     std::size_t dc_iteration, std::vector<std::string>& notes) {
  const std::string where = "DC iteration " + std::to_string(dc_iteration);
  try {
    if (penalty.rho == 0.0) {
      const std::size_t levels = psi.psi.size();
      std::vector<Matrix> blocks(levels);
      std::vector<std::optional<std::string>> diagnostics(levels);
      parallel_for(levels, [&](std::size_t l) {
        auto r = glasso_solve(GlassoProblem{psi.psi[l], penalty.lambda, false}, warm[l],
                              GlassoOptions{tol, 500});
        blocks[l] = std::move(r.q);
        diagnostics[l] = std::move(r.diagnostic);
      });
      for (std::size_t l = 0; l < levels; ++l)
        if (diagnostics[l])
          notes.push_back(where + ", level " + std::to_string(l + 1) + ": " + *diagnostics[l]);
      return PrecisionBlockSet(std::move(blocks));
    }
    auto r = fmgl_solve(FmglProblem{psi.psi, penalty.lambda, penalty.rho}, warm,
                        FmglOptions{tol, 500});
    if (r.diagnostic) notes.push_back(where + ": " + *r.diagnostic);
    return std::move(r.q);
  } catch (const Error& e) {
    fail(ErrorCode::InnerSolverFailure, where + ": " + e.what());
  }
}

inline void record_step(FitReport& report, double objective, double relative_change,
                        std::ostream* progress) {
  const double previous = report.objective_trace.back();
  if (objective > previous + kMonotoneSlack) {
    fail(ErrorCode::NonmonotoneObjective,
         "objective rose from " + std::to_string(previous) + " to " + std::to_string(objective) +
             " at DC iteration " + std::to_string(report.n_dc_iterations + 1));
  }
  report.objective_trace.push_back(objective);
  report.relative_change_trace.push_back(relative_change);
  ++report.n_dc_iterations;
  if (progress) {
    *progress << report.n_dc_iterations << ' ' << objective << ' ' << relative_change << '\n';
  }
}

}  // namespace detail

/// Difference-of-convex fit: linearize the concave log det(Q + T) part at
/// the current blocks, solve the resulting (fused) graphical lasso, repeat
/// until ||Q_new - Q||_F / ||Q||_F < dc_tolerance over the stacked blocks.
///
/// Without an explicit init, lambda-only fits start from the diagonal of the
/// first linearization at Q = I, and fused fits start from the converged
/// unfused (rho = 0) fit.
inline FitResult dc_fit(const SuffStats& stats, const NoiseModel& noise, const PenaltyConfig& penalty,
                        const std::optional<PrecisionBlockSet>& init = {},
                        std::ostream* progress = nullptr) {
  penalty.validate();
  const auto start = std::chrono::steady_clock::now();
  PrecisionBlockSet q;
  if (init) {
    q = *init;
  } else if (penalty.rho > 0.0) {
    PenaltyConfig unfused = penalty;
    unfused.rho = 0.0;
    q = dc_fit(stats, noise, unfused, std::nullopt, nullptr).q;
  } else {
    q = detail::diagonal_start(stats, noise);
  }

  FitResult result;
  FitReport& report = result.report;
  report.penalty = penalty;
  report.objective_trace.push_back(penalized_objective(q, stats, noise, penalty));

  double last_change = 0.0;
  for (std::size_t iter = 1; iter <= penalty.max_dc_iterations; ++iter) {
    const auto psi = linearization_blocks(q, stats, noise);
    const double tol = std::max(penalty.inner_tolerance, 0.01 * last_change);
    PrecisionBlockSet next = detail::solve_inner(psi, penalty, q, tol, iter, report.notes);
    const double change = next.relative_change_from(q);
    detail::record_step(report, penalized_objective(next, stats, noise, penalty), change, progress);
    q = std::move(next);
    last_change = change;
    if (change < penalty.dc_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.q = std::move(q);
  return result;
}

/// Unpenalized maximum likelihood: the DC step reduces to inverting each
/// linearization block.
inline FitResult mle_fit(const SuffStats& stats, const NoiseModel& noise, double dc_tolerance = 0.05,
                         std::size_t max_dc_iterations = 500,
                         const std::optional<PrecisionBlockSet>& init = {},
                         std::ostream* progress = nullptr) {
  require(dc_tolerance > 0.0 && max_dc_iterations >= 1, ErrorCode::InvalidArgument,
          "invalid DC settings");
  if (stats.m < stats.p) {
    fail(ErrorCode::SingularLinearization,
         "only " + std::to_string(stats.m) + " realizations for " + std::to_string(stats.p) +
             " variables; the level second moments are rank deficient, add a sparsity penalty");
  }
  const auto start = std::chrono::steady_clock::now();
  PrecisionBlockSet q = init ? *init : PrecisionBlockSet::identity(stats.p, stats.levels);

  FitResult result;
  FitReport& report = result.report;
  report.mle_mode = true;
  report.penalty = PenaltyConfig{0.0, 0.0, dc_tolerance, 1e-6, max_dc_iterations};
  report.objective_trace.push_back(negloglik_reduced(q, stats, noise));

  for (std::size_t iter = 1; iter <= max_dc_iterations; ++iter) {
    const auto psi = linearization_blocks(q, stats, noise);
    std::vector<Matrix> blocks(stats.levels);
    for (std::size_t l = 0; l < stats.levels; ++l) {
      const auto llt = linalg::try_cholesky(psi.psi[l]);
      const Vector d = llt ? Vector(llt->matrixLLT().diagonal()) : Vector();
      if (!llt || d.minCoeff() * d.minCoeff() < 1e-12 * d.maxCoeff() * d.maxCoeff()) {
        fail(ErrorCode::SingularLinearization,
             "linearization block at level " + std::to_string(l + 1) + " is singular at DC iteration " +
                 std::to_string(iter) + "; add a sparsity penalty");
      }
      blocks[l] = linalg::inverse(*llt);
    }
    PrecisionBlockSet next(std::move(blocks));
    const double change = next.relative_change_from(q);
    detail::record_step(report, negloglik_reduced(next, stats, noise), change, progress);
    q = std::move(next);
    if (change < dc_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.q = std::move(q);
  return result;
}

}  // namespace mbgl
