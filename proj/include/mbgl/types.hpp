#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/linalg.hpp"

namespace mbgl {

using linalg::Matrix;
using linalg::Vector;

/// Multi-realization multivariate spatial data.
///
/// `values` is a p x n x m array stored first-index-fastest, so realization r
/// is the contiguous p x n block mat(Y_r) whose column-stacking is the
/// location-major observation vector (Y(s_1)^T, ..., Y(s_n)^T)^T.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::size_t n_vars, std::size_t n_locations, std::size_t n_realizations,
          std::vector<double> values, Matrix locations = {},
          std::vector<std::string> variable_names = {})
      : p_(n_vars),
        n_(n_locations),
        m_(n_realizations),
        values_(std::move(values)),
        locations_(std::move(locations)),
        names_(std::move(variable_names)) {
    require(p_ >= 1 && n_ >= 1 && m_ >= 1, ErrorCode::DimensionMismatch,
            "dataset dimensions must all be at least 1");
    require(values_.size() == p_ * n_ * m_, ErrorCode::DimensionMismatch,
            "dataset payload has " + std::to_string(values_.size()) + " values, expected " +
                std::to_string(p_ * n_ * m_));
    for (double v : values_) {
      require(std::isfinite(v), ErrorCode::InvalidArgument, "dataset values must be finite");
    }
    if (locations_.size() == 0) {
      locations_ = Matrix(idx(n_), 1);
      for (std::size_t s = 0; s < n_; ++s) locations_(idx(s), 0) = double(s);
    }
    require(static_cast<std::size_t>(locations_.rows()) == n_ && locations_.cols() >= 1,
            ErrorCode::DimensionMismatch, "locations must be an n x d array with d >= 1");
    if (names_.empty()) {
      for (std::size_t i = 0; i < p_; ++i) names_.push_back("var" + std::to_string(i + 1));
    }
    require(names_.size() == p_, ErrorCode::DimensionMismatch,
            "expected one variable name per variable");
    require(std::set<std::string>(names_.begin(), names_.end()).size() == p_,
            ErrorCode::InvalidArgument, "variable names must be unique");
  }

  std::size_t n_vars() const { return p_; }
  std::size_t n_locations() const { return n_; }
  std::size_t n_realizations() const { return m_; }
  const std::vector<double>& values() const { return values_; }
  const Matrix& locations() const { return locations_; }
  const std::vector<std::string>& variable_names() const { return names_; }

  double at(std::size_t var, std::size_t loc, std::size_t rep) const {
    return values_[var + p_ * (loc + n_ * rep)];
  }

  /// mat(Y_r): p x n view of one realization.
  Eigen::Map<const Matrix> realization(std::size_t r) const {
    return {values_.data() + p_ * n_ * r, idx(p_),
            idx(n_)};
  }

  /// n x m matrix holding one variable across locations and realizations.
  Matrix variable(std::size_t var) const {
    Matrix out(idx(n_), idx(m_));
    for (std::size_t r = 0; r < m_; ++r)
      for (std::size_t s = 0; s < n_; ++s)
        out(idx(s), idx(r)) = at(var, s, r);
    return out;
  }

 private:
  std::size_t p_ = 0;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<double> values_;
  Matrix locations_;
  std::vector<std::string> names_;
};

/// Per-pixel, per-variable moments removed by standardize(). Both are p x n.
struct StandardizationFields {
  Matrix pixel_mean;
  Matrix pixel_sd;
};

/// n x L spatial basis with orthonormal columns.
struct BasisMatrix {
  Matrix phi;
  /// Cumulative explained-variance fractions; empty for user-supplied bases.
  std::vector<double> variance_fraction;

  std::size_t n_locations() const { return static_cast<std::size_t>(phi.rows()); }
  std::size_t n_levels() const { return static_cast<std::size_t>(phi.cols()); }
};

/// Per-level p x p precision matrices Q_1..Q_L of the basis weight vectors.
class PrecisionBlockSet {
 public:
  PrecisionBlockSet() = default;

  explicit PrecisionBlockSet(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    require(!blocks_.empty(), ErrorCode::DimensionMismatch, "need at least one level");
    const auto p = blocks_.front().rows();
    require(p >= 1, ErrorCode::DimensionMismatch, "blocks must be at least 1 x 1");
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const Matrix& b = blocks_[l];
      const std::string where = "precision block " + std::to_string(l + 1);
      require(b.rows() == p && b.cols() == p, ErrorCode::DimensionMismatch,
              where + " has inconsistent shape");
      require(linalg::max_asymmetry(b) <= 1e-10, ErrorCode::InvalidArgument,
              where + " is not symmetric");
      if (!linalg::try_cholesky(b)) fail(ErrorCode::NotPositiveDefinite, where + " is not PD");
    }
  }

  static PrecisionBlockSet identity(std::size_t p, std::size_t levels) {
    return PrecisionBlockSet(std::vector<Matrix>(
        levels, Matrix::Identity(idx(p), idx(p))));
  }

  std::size_t p() const { return static_cast<std::size_t>(blocks_.front().rows()); }
  std::size_t levels() const { return blocks_.size(); }
  const Matrix& operator[](std::size_t level) const { return blocks_[level]; }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  /// Frobenius norm of the block-diagonal whole.
  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return std::sqrt(s);
  }

  double relative_change_from(const PrecisionBlockSet& previous) const {
    require(previous.levels() == levels() && previous.p() == p(), ErrorCode::DimensionMismatch,
            "block sets differ in shape");
    double diff = 0.0;
    for (std::size_t l = 0; l < levels(); ++l) diff += (blocks_[l] - previous[l]).squaredNorm();
    return std::sqrt(diff) / previous.frobenius_norm();
  }

 private:
  std::vector<Matrix> blocks_;
};

/// Error variances tau^2_1..tau^2_p, one per variable.
class NoiseModel {
 public:
  NoiseModel() = default;

  explicit NoiseModel(Vector tau_sq) : tau_sq_(std::move(tau_sq)) {
    require(tau_sq_.size() >= 1, ErrorCode::DimensionMismatch, "need at least one variance");
    for (Eigen::Index i = 0; i < tau_sq_.size(); ++i) {
      require(std::isfinite(tau_sq_(i)) && tau_sq_(i) > 0.0, ErrorCode::InvalidArgument,
              "error variances must be finite and strictly positive");
    }
  }

  static NoiseModel constant(std::size_t p, double value) {
    return NoiseModel(Vector::Constant(idx(p), value));
  }

  std::size_t p() const { return static_cast<std::size_t>(tau_sq_.size()); }
  const Vector& tau_sq() const { return tau_sq_; }
  /// diag(tau^-2), the per-level block of Phi^T D^-1 Phi for an orthonormal basis.
  Vector precision() const { return tau_sq_.cwiseInverse(); }

 private:
  Vector tau_sq_;
};

struct PenaltyConfig {
  double lambda = 0.0;
  double rho = 0.0;
  double dc_tolerance = 0.05;
  double inner_tolerance = 1e-6;
  std::size_t max_dc_iterations = 100;

  void validate() const {
    require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidArgument,
            "lambda must be finite and >= 0");
    require(std::isfinite(rho) && rho >= 0.0, ErrorCode::InvalidArgument,
            "rho must be finite and >= 0");
    require(dc_tolerance > 0.0, ErrorCode::InvalidArgument, "dc_tolerance must be > 0");
    require(inner_tolerance > 0.0, ErrorCode::InvalidArgument, "inner_tolerance must be > 0");
    require(max_dc_iterations >= 1, ErrorCode::InvalidArgument,
            "max_dc_iterations must be >= 1");
  }
};

}  // namespace mbgl
