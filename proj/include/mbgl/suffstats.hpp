#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// Everything the likelihood needs from the raw data under an orthonormal
/// basis: the projected, noise-weighted realizations
///   A_i = diag(tau^-2) mat(Y_i) Phi        (p x L, one per realization)
/// so that vec(A_i) = Phi^T D^-1 Y_i, plus the per-variable trace terms of
/// the Q-independent likelihood constant.
struct SuffStats {
  std::size_t p = 0;
  std::size_t levels = 0;
  std::size_t m = 0;
  std::vector<Matrix> weights;  // m matrices, p x L
  Vector gram_diag;             // diag(tau^-2); Phi^T D^-1 Phi = I_L (x) diag(gram_diag)
  Matrix trace_terms;           // p x m: sum_s Y_i(s)_v^2 / tau_v^2 for each realization
  Vector log_tau_sq;            // kept for the log det D constant

  /// Per-variable (1/m) sum over locations and realizations of Y^2 / tau^2.
  Vector trace_SD() const { return trace_terms.rowwise().sum() / double(m); }

  /// log det D + tr(S D^-1): the gap between the dense and reduced likelihoods.
  double likelihood_constant(std::size_t n_locations) const {
    return double(n_locations) * log_tau_sq.sum() + trace_SD().sum();
  }
};

inline SuffStats compute_suffstats(const Dataset& data, const BasisMatrix& basis,
                                   const NoiseModel& noise) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  require(basis.n_locations() == n, ErrorCode::DimensionMismatch,
          "basis has " + std::to_string(basis.n_locations()) + " rows but data has " +
              std::to_string(n) + " locations");
  require(noise.p() == p, ErrorCode::DimensionMismatch,
          "noise model has " + std::to_string(noise.p()) + " variances for " + std::to_string(p) +
              " variables");

  SuffStats stats;
  stats.p = p;
  stats.levels = basis.n_levels();
  stats.m = m;
  stats.gram_diag = noise.precision();
  stats.log_tau_sq = noise.tau_sq().array().log();
  stats.weights.resize(m);
  stats.trace_terms = Matrix(idx(p), idx(m));

  const auto inv_tau = stats.gram_diag.asDiagonal();
  parallel_for(m, [&](std::size_t r) {
    const auto y = data.realization(r);
    stats.weights[r].noalias() = inv_tau * (y * basis.phi);
    stats.trace_terms.col(idx(r)) =
        y.cwiseAbs2().rowwise().sum().cwiseProduct(stats.gram_diag);
  });
  return stats;
}

/// Statistics restricted to a subset of realizations (used for CV folds).
inline SuffStats subset(const SuffStats& stats, const std::vector<std::size_t>& realizations) {
  require(!realizations.empty(), ErrorCode::FoldTooSmall, "empty realization subset");
  SuffStats out;
  out.p = stats.p;
  out.levels = stats.levels;
  out.m = realizations.size();
  out.gram_diag = stats.gram_diag;
  out.log_tau_sq = stats.log_tau_sq;
  out.trace_terms = Matrix(idx(stats.p), idx(out.m));
  for (std::size_t k = 0; k < realizations.size(); ++k) {
    const auto r = realizations[k];
    require(r < stats.m, ErrorCode::IndexOutOfRange, "realization index out of range");
    out.weights.push_back(stats.weights[r]);
    out.trace_terms.col(idx(k)) = stats.trace_terms.col(idx(r));
  }
  return out;
}

/// B_l = (1/m) sum_i A_i[:, l] A_i[:, l]^T, the l-th p x p diagonal block of
/// Phi^T D^-1 S D^-1 Phi. Levels are zero-based.
inline Matrix second_moment_block(const SuffStats& stats, std::size_t level) {
  require(level < stats.levels, ErrorCode::IndexOutOfRange,
          "level " + std::to_string(level) + " out of range [0, " + std::to_string(stats.levels) +
              ")");
  const auto p = idx(stats.p);
  Matrix b = Matrix::Zero(p, p);
  for (const auto& a : stats.weights) {
    const auto col = a.col(idx(level));
    b.selfadjointView<Eigen::Lower>().rankUpdate(col);
  }
  b = b.selfadjointView<Eigen::Lower>();
  return b / double(stats.m);
}

}  // namespace mbgl
