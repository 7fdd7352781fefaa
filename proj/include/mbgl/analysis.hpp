#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mbgl/core_model.hpp"
#include "mbgl/error.hpp"
#include "mbgl/linalg.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// Z(s) = sum_l phi_l(s) W_l + eps with W_l ~ N(0, Q_l^-1) independent
/// across levels and eps_i ~ N(0, tau_i^2).
struct FittedModel {
  BasisMatrix basis;
  PrecisionBlockSet q;
  NoiseModel noise;
  std::optional<StandardizationFields> standardization;
  std::vector<std::string> variable_names;

  std::size_t p() const { return q.p(); }
  std::size_t levels() const { return q.levels(); }
  std::size_t n_locations() const { return basis.n_locations(); }

  void validate() const {
    require(basis.n_levels() == q.levels(), ErrorCode::DimensionMismatch,
            "basis has " + std::to_string(basis.n_levels()) + " levels, model has " +
                std::to_string(q.levels()));
    require(noise.p() == q.p(), ErrorCode::DimensionMismatch, "noise model size mismatch");
    require(variable_names.empty() || variable_names.size() == q.p(), ErrorCode::DimensionMismatch,
            "variable name count mismatch");
    if (standardization) {
      require(standardization->pixel_mean.rows() == idx(p()) &&
                  standardization->pixel_mean.cols() == idx(n_locations()),
              ErrorCode::DimensionMismatch, "standardization fields do not match the model");
    }
  }
};

/// Per-level covariance blocks Q_l^-1, computed once per model.
struct CovBlockCache {
  std::vector<Matrix> sigma_blocks;
};

inline CovBlockCache make_cov_cache(const PrecisionBlockSet& q) {
  CovBlockCache cache;
  cache.sigma_blocks.resize(q.levels());
  parallel_for(q.levels(), [&](std::size_t l) {
    cache.sigma_blocks[l] = linalg::spd_inverse(q[l], "Q at level " + std::to_string(l + 1));
  });
  return cache;
}

/// Covariance and correlation queries on a fitted model.
class ModelAnalysis {
 public:
  explicit ModelAnalysis(FittedModel model) : model_(std::move(model)) {
    model_.validate();
    cache_ = make_cov_cache(model_.q);
  }

  const FittedModel& model() const { return model_; }
  const CovBlockCache& cache() const { return cache_; }

  /// Cov(Z_i(s), Z_j(t)) = sum_l phi_l(s) (Q_l^-1)_ij phi_l(t), plus tau_i^2
  /// when include_noise and (i, s) == (j, t). Symmetric in (i, j) and in (s, t)
  /// bit for bit.
  double cross_covariance(std::size_t i, std::size_t j, std::size_t s, std::size_t t,
                          bool include_noise = false) const {
    check_var(i);
    check_var(j);
    check_loc(s);
    check_loc(t);
    const Matrix& phi = model_.basis.phi;
    double total = 0.0;
    for (std::size_t l = 0; l < cache_.sigma_blocks.size(); ++l) {
      const double weight = phi(idx(s), idx(l)) * phi(idx(t), idx(l));
      total += weight * cache_.sigma_blocks[l](idx(i), idx(j));
    }
    if (include_noise && i == j && s == t) total += model_.noise.tau_sq()(idx(i));
    return total;
  }

  Vector variance_field(std::size_t i, bool include_noise = false) const {
    const auto n = model_.n_locations();
    Vector out(idx(n), 1);
    for (std::size_t s = 0; s < n; ++s) out(idx(s)) = cross_covariance(i, i, s, s, include_noise);
    return out;
  }

  Vector local_sd_field(std::size_t i, bool include_noise = false) const {
    return variance_field(i, include_noise).cwiseSqrt();
  }

  /// Correlation between Z_i(anchor) and Z_j(t) for every location t.
  Vector correlation_map(std::size_t i, std::size_t j, std::size_t anchor,
                         bool include_noise = false) const {
    const auto n = model_.n_locations();
    const double var_anchor = cross_covariance(i, i, anchor, anchor, include_noise);
    require(var_anchor > 0.0, ErrorCode::ZeroVarianceLocation,
            "variable " + std::to_string(i + 1) + " has zero variance at the anchor location");
    const Vector var_j = variance_field(j, include_noise);
    Vector out(idx(n), 1);
    for (std::size_t t = 0; t < n; ++t) {
      const double vt = var_j(idx(t));
      require(vt > 0.0, ErrorCode::ZeroVarianceLocation,
              "variable " + std::to_string(j + 1) + " has zero variance at location " +
                  std::to_string(t));
      out(idx(t)) = cross_covariance(i, j, anchor, t, include_noise) / std::sqrt(var_anchor * vt);
    }
    return out;
  }

  /// Correlation between Z_i(s) and Z_j(s) at every location s.
  Vector local_cross_correlation_field(std::size_t i, std::size_t j, bool include_noise = false) const {
    const auto n = model_.n_locations();
    const Vector var_i = variance_field(i, include_noise);
    const Vector var_j = variance_field(j, include_noise);
    Vector out(idx(n), 1);
    for (std::size_t s = 0; s < n; ++s) {
      const double denom = var_i(idx(s)) * var_j(idx(s));
      require(denom > 0.0, ErrorCode::ZeroVarianceLocation,
              "zero variance at location " + std::to_string(s));
      out(idx(s)) = cross_covariance(i, j, s, s, include_noise) / std::sqrt(denom);
    }
    return out;
  }

 private:
  void check_var(std::size_t i) const {
    require(i < model_.p(), ErrorCode::IndexOutOfRange, "variable index " + std::to_string(i) + " out of range");
  }
  void check_loc(std::size_t s) const {
    require(s < model_.n_locations(), ErrorCode::IndexOutOfRange,
            "location index " + std::to_string(s) + " out of range");
  }

  FittedModel model_;
  CovBlockCache cache_;
};

// Graph summaries. Levels are reported 1-based where a level number is the
// result; zero_tol separates edges from numerical dust.

inline constexpr double kDefaultZeroTol = 1e-8;

/// L x p matrix of diagonals of Q_1..Q_L.
inline Matrix marginal_precisions(const PrecisionBlockSet& q) {
  Matrix out(idx(q.levels()), idx(q.p()));
  for (std::size_t l = 0; l < q.levels(); ++l) out.row(idx(l)) = q[l].diagonal().transpose();
  return out;
}

inline std::vector<std::size_t> edge_counts_by_level(const PrecisionBlockSet& q,
                                                     double zero_tol = kDefaultZeroTol) {
  std::vector<std::size_t> counts(q.levels(), 0);
  const auto p = idx(q.p());
  for (std::size_t l = 0; l < q.levels(); ++l)
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < j; ++i)
        if (std::abs(q[l](i, j)) > zero_tol) ++counts[l];
  return counts;
}

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// (l, j) is true when variable j is a neighbor of variable `var` at level l.
inline BoolArray neighbor_trace(const PrecisionBlockSet& q, std::size_t var,
                                double zero_tol = kDefaultZeroTol) {
  require(var < q.p(), ErrorCode::IndexOutOfRange, "variable index out of range");
  BoolArray out = BoolArray::Constant(idx(q.levels()), idx(q.p()), false);
  for (std::size_t l = 0; l < q.levels(); ++l)
    for (std::size_t j = 0; j < q.p(); ++j)
      out(idx(l), idx(j)) =
          j != var && std::abs(q[l](idx(var), idx(j))) > zero_tol;
  return out;
}

/// First level (1-based) from which each variable has no neighbors at any
/// finer level; L + 1 when it still has a neighbor at level L.
inline std::vector<std::size_t> independence_level(const PrecisionBlockSet& q,
                                                   double zero_tol = kDefaultZeroTol) {
  const std::size_t levels = q.levels(), p = q.p();
  std::vector<std::size_t> out(p, 1);
  for (std::size_t v = 0; v < p; ++v) {
    for (std::size_t l = levels; l-- > 0;) {
      bool has_neighbor = false;
      for (std::size_t j = 0; j < p && !has_neighbor; ++j)
        has_neighbor = j != v && std::abs(q[l](idx(v), idx(j))) > zero_tol;
      if (has_neighbor) {
        out[v] = l + 2;
        break;
      }
    }
  }
  return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Draws m_out realizations from the model. Realization r uses its own
/// generator seeded from (seed, r), so output does not depend on threading.
inline Dataset simulate(const FittedModel& model, std::size_t m_out, std::uint64_t seed,
                        bool add_noise = true, bool destandardize_output = false) {
  model.validate();
  require(m_out >= 1, ErrorCode::InvalidArgument, "need at least one realization");
  require(!destandardize_output || model.standardization.has_value(), ErrorCode::InvalidArgument,
          "model has no standardization fields to invert");
  const auto p = model.p(), n = model.n_locations(), levels = model.levels();

  std::vector<Matrix> chol_lower(levels);
  for (std::size_t l = 0; l < levels; ++l)
    chol_lower[l] = linalg::cholesky(model.q[l], "Q at level " + std::to_string(l + 1)).matrixL();
  const Vector tau = model.noise.tau_sq().cwiseSqrt();

  std::vector<double> values(p * n * m_out);
  parallel_for(m_out, [&](std::size_t r) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(r + 1)));
    std::normal_distribution<double> normal;
    Matrix weights(idx(p), idx(levels));
    Vector z(idx(p));
    for (std::size_t l = 0; l < levels; ++l) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
      // Q = L L^T; x = L^-T z has covariance Q^-1.
      weights.col(idx(l)) = chol_lower[l].transpose().triangularView<Eigen::Upper>().solve(z);
    }
    Eigen::Map<Matrix> out(values.data() + p * n * r, idx(p), idx(n));
    out.noalias() = weights * model.basis.phi.transpose();
    if (add_noise) {
      for (Eigen::Index s = 0; s < idx(n); ++s)
        for (Eigen::Index v = 0; v < idx(p); ++v) out(v, s) += tau(v) * normal(rng);
    }
  });

  Dataset sim(p, n, m_out, std::move(values), {}, model.variable_names);
  if (destandardize_output) return destandardize(sim, *model.standardization);
  return sim;
}

}  // namespace mbgl
