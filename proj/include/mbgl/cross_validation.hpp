#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mbgl/dc_optimizer.hpp"
#include "mbgl/error.hpp"
#include "mbgl/likelihood.hpp"
#include "mbgl/suffstats.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

struct CvPlan {
  std::size_t k = 5;
  std::vector<std::size_t> fold_assignment;  // fold index (0-based) per realization
  std::vector<double> lambda_grid;
  std::vector<double> rho_grid;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignment.size(); ++r)
      if (fold_assignment[r] == fold) out.push_back(r);
    return out;
  }

  std::vector<std::size_t> fold_complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignment.size(); ++r)
      if (fold_assignment[r] != fold) out.push_back(r);
    return out;
  }

  void validate(std::size_t m) const {
    require(k >= 2, ErrorCode::InvalidArgument, "need at least 2 folds");
    require(m >= k, ErrorCode::FoldTooSmall,
            std::to_string(m) + " realizations cannot fill " + std::to_string(k) + " folds");
    require(fold_assignment.size() == m, ErrorCode::DimensionMismatch,
            "fold assignment must cover every realization");
    std::vector<std::size_t> sizes(k, 0);
    for (auto f : fold_assignment) {
      require(f < k, ErrorCode::InvalidArgument, "fold index out of range");
      ++sizes[f];
    }
    for (std::size_t f = 0; f < k; ++f)
      require(sizes[f] > 0, ErrorCode::FoldTooSmall, "fold " + std::to_string(f + 1) + " is empty");
    require(!lambda_grid.empty() && !rho_grid.empty(), ErrorCode::InvalidArgument,
            "penalty grids must be nonempty");
    for (double v : lambda_grid)
      require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, "invalid lambda in grid");
    for (double v : rho_grid)
      require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, "invalid rho in grid");
  }
};

/// Seeded shuffle of realization indices, then contiguous blocks per fold.
inline CvPlan make_cv_plan(std::size_t m, std::size_t k, std::vector<double> lambda_grid,
                           std::vector<double> rho_grid, std::uint64_t seed) {
  require(k >= 2, ErrorCode::InvalidArgument, "need at least 2 folds");
  require(m >= k, ErrorCode::FoldTooSmall,
          std::to_string(m) + " realizations cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  CvPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_assignment.assign(m, 0);
  for (std::size_t pos = 0; pos < m; ++pos) plan.fold_assignment[order[pos]] = pos * k / m;
  plan.lambda_grid = std::move(lambda_grid);
  plan.rho_grid = std::move(rho_grid);
  return plan;
}

struct CvRow {
  int stage = 1;  // 1: lambda search at rho = 0, 2: rho search at the chosen lambda
  double lambda = 0.0;
  double rho = 0.0;
  double mean_score = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fold_scores;
  bool failed = false;
  std::string message;
};

struct CvResult {
  PenaltyConfig selected;
  double selected_score = 0.0;
  std::vector<CvRow> table;
};

struct CvOptions {
  PenaltyConfig base;  // tolerances and iteration caps for every fit
  /// Called before each fold fit with (lambda, rho, fold, train, test).
  std::function<void(double, double, std::size_t, const std::vector<std::size_t>&,
                     const std::vector<std::size_t>&)>
      observer;
};

namespace detail {

inline CvRow score_candidate(const SuffStats& stats, const NoiseModel& noise, const CvPlan& plan,
                             const CvOptions& options, int stage, double lambda, double rho) {
  CvRow row;
  row.stage = stage;
  row.lambda = lambda;
  row.rho = rho;
  PenaltyConfig penalty = options.base;
  penalty.lambda = lambda;
  penalty.rho = rho;
  try {
    double total = 0.0;
    for (std::size_t fold = 0; fold < plan.k; ++fold) {
      const auto test = plan.fold_members(fold);
      const auto train = plan.fold_complement(fold);
      if (options.observer) options.observer(lambda, rho, fold, train, test);
      const auto fit = dc_fit(subset(stats, train), noise, penalty);
      const double score = negloglik_reduced(fit.q, subset(stats, test), noise);
      row.fold_scores.push_back(score);
      total += score;
    }
    row.mean_score = total / double(plan.k);
  } catch (const Error& e) {
    row.failed = true;
    row.message = e.what();
  }
  return row;
}

// Lowest mean score wins; ties go to the larger penalty.
inline const CvRow* pick_best(const std::vector<CvRow>& rows, bool by_lambda) {
  const CvRow* best = nullptr;
  for (const auto& row : rows) {
    if (row.failed || !std::isfinite(row.mean_score)) continue;
    if (!best) {
      best = &row;
      continue;
    }
    const double pen = by_lambda ? row.lambda : row.rho;
    const double best_pen = by_lambda ? best->lambda : best->rho;
    if (row.mean_score < best->mean_score ||
        (row.mean_score == best->mean_score && pen > best_pen)) {
      best = &row;
    }
  }
  return best;
}

}  // namespace detail

/// Two-stage k-fold selection: lambda over lambda_grid with rho = 0, then rho
/// over rho_grid at the winning lambda. Each candidate is scored by the mean
/// held-out reduced likelihood of the fit to the complementary folds.
inline CvResult cross_validate(const SuffStats& stats, const NoiseModel& noise, const CvPlan& plan,
                               const CvOptions& options = {}) {
  plan.validate(stats.m);
  CvResult result;
  std::vector<CvRow> stage1;
  for (double lambda : plan.lambda_grid)
    stage1.push_back(detail::score_candidate(stats, noise, plan, options, 1, lambda, 0.0));
  const CvRow* best_lambda = detail::pick_best(stage1, true);
  result.table = stage1;
  if (!best_lambda) fail(ErrorCode::InnerSolverFailure, "every lambda candidate failed");
  const double lambda = best_lambda->lambda;

  std::vector<CvRow> stage2;
  for (double rho : plan.rho_grid)
    stage2.push_back(detail::score_candidate(stats, noise, plan, options, 2, lambda, rho));
  const CvRow* best = detail::pick_best(stage2, false);
  result.table.insert(result.table.end(), stage2.begin(), stage2.end());
  if (!best) fail(ErrorCode::InnerSolverFailure, "every rho candidate failed");

  result.selected = options.base;
  result.selected.lambda = best->lambda;
  result.selected.rho = best->rho;
  result.selected_score = best->mean_score;
  return result;
}

inline CvResult cross_validate(const Dataset& data, const BasisMatrix& basis, const NoiseModel& noise,
                               const CvPlan& plan, const CvOptions& options = {}) {
  return cross_validate(compute_suffstats(data, basis, noise), noise, plan, options);
}

}  // namespace mbgl
