#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/linalg.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/suffstats.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// Per-level blocks of the linearization matrix that the DC step feeds to
/// the graphical lasso as its "sample covariance".
struct LinearizationBlocks {
  std::vector<Matrix> psi;
};

namespace detail {

inline void check_shapes(const PrecisionBlockSet& q, const SuffStats& stats,
                         const NoiseModel& noise) {
  require(q.p() == stats.p && q.levels() == stats.levels, ErrorCode::DimensionMismatch,
          "precision blocks (" + std::to_string(q.levels()) + " x " + std::to_string(q.p()) +
              ") do not match statistics (" + std::to_string(stats.levels) + " x " +
              std::to_string(stats.p) + ")");
  require(noise.p() == stats.p, ErrorCode::DimensionMismatch, "noise model size mismatch");
}

inline std::string level_name(std::size_t level) { return "level " + std::to_string(level + 1); }

}  // namespace detail

/// Reduced negative log-likelihood under block-diagonal Q and an orthonormal
/// basis, with T = diag(tau^-2):
///   sum_l  log det(Q_l + T) - log det Q_l - tr(B_l (Q_l + T)^-1).
/// Differs from the dense log det Sigma + tr(S Sigma^-1) by the Q-free
/// constant SuffStats::likelihood_constant().
inline double negloglik_reduced(const PrecisionBlockSet& q, const SuffStats& stats,
                                const NoiseModel& noise) {
  detail::check_shapes(q, stats, noise);
  const Vector t = noise.precision();
  std::vector<double> terms(q.levels());
  parallel_for(q.levels(), [&](std::size_t l) {
    const auto q_llt = linalg::cholesky(q[l], "Q at " + detail::level_name(l));
    Matrix shifted = q[l];
    shifted.diagonal() += t;
    const auto s_llt = linalg::cholesky(shifted, "Q + T at " + detail::level_name(l));
    const Matrix b = second_moment_block(stats, l);
    terms[l] = linalg::log_det(s_llt) - linalg::log_det(q_llt) - s_llt.solve(b).trace();
  });
  double total = 0.0;
  for (double v : terms) total += v;
  return total;
}

/// Psi_l = M_l + M_l B_l M_l with M_l = (Q_l + T)^-1.
inline LinearizationBlocks linearization_blocks(const PrecisionBlockSet& q, const SuffStats& stats,
                                                const NoiseModel& noise) {
  detail::check_shapes(q, stats, noise);
  const Vector t = noise.precision();
  LinearizationBlocks out;
  out.psi.resize(q.levels());
  parallel_for(q.levels(), [&](std::size_t l) {
    Matrix shifted = q[l];
    shifted.diagonal() += t;
    const Matrix m = linalg::spd_inverse(shifted, "Q + T at " + detail::level_name(l));
    const Matrix b = second_moment_block(stats, l);
    out.psi[l] = linalg::symmetrized(m + m * b * m);
  });
  return out;
}

/// Dense reference for small problems: builds the np x np covariance
/// Sigma = (Phi (x) I_p) Q^-1 (Phi (x) I_p)^T + D explicitly and returns
/// log det Sigma + tr(S Sigma^-1). Cost O(n^3 p^3).
inline double negloglik_dense_oracle(const PrecisionBlockSet& q, const Dataset& data,
                                     const BasisMatrix& basis, const NoiseModel& noise) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  const auto levels = basis.n_levels();
  require(n * p <= 2000, ErrorCode::TooLargeForOracle,
          "dense oracle limited to n p <= 2000, got " + std::to_string(n * p));
  require(q.p() == p && q.levels() == levels && noise.p() == p &&
              basis.n_locations() == n,
          ErrorCode::DimensionMismatch, "oracle inputs have inconsistent shapes");

  const auto np = idx(n * p), lp = idx(levels * p);
  const auto ip = Matrix::Identity(idx(p), idx(p));
  Matrix big_phi = Matrix::Zero(np, lp);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t l = 0; l < levels; ++l)
      big_phi.block(idx(s * p), idx(l * p), idx(p), idx(p)) =
          basis.phi(idx(s), idx(l)) * ip;

  Matrix q_inv = Matrix::Zero(lp, lp);
  for (std::size_t l = 0; l < levels; ++l)
    q_inv.block(idx(l * p), idx(l * p), idx(p), idx(p)) =
        linalg::spd_inverse(q[l], "Q at " + detail::level_name(l));

  Matrix sigma = big_phi * q_inv * big_phi.transpose();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t v = 0; v < p; ++v)
      sigma(idx(s * p + v), idx(s * p + v)) += noise.tau_sq()(idx(v));
  sigma = linalg::symmetrized(sigma);

  Matrix s_mat = Matrix::Zero(np, np);
  for (std::size_t r = 0; r < m; ++r) {
    const auto y = data.realization(r).reshaped();
    s_mat.noalias() += y * y.transpose();
  }
  s_mat /= double(m);

  const auto llt = linalg::cholesky(sigma, "dense covariance");
  return linalg::log_det(llt) + llt.solve(s_mat).trace();
}

}  // namespace mbgl
