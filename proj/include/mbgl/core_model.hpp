#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// Removes the pixelwise empirical mean and divides by the pixelwise sample
/// standard deviation (divisor m - 1), separately for every variable.
inline std::pair<Dataset, StandardizationFields> standardize(const Dataset& data) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  require(m >= 2, ErrorCode::TooFewRealizations,
          "standardization needs at least 2 realizations, got " + std::to_string(m));

  StandardizationFields fields{Matrix::Zero(idx(p), idx(n)),
                               Matrix::Zero(idx(p), idx(n))};
  for (std::size_t r = 0; r < m; ++r) fields.pixel_mean += data.realization(r);
  fields.pixel_mean /= double(m);
  for (std::size_t r = 0; r < m; ++r)
    fields.pixel_sd += (data.realization(r) - fields.pixel_mean).cwiseAbs2();
  fields.pixel_sd = (fields.pixel_sd / double(m - 1)).cwiseSqrt();

  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t v = 0; v < p; ++v) {
      const double sd = fields.pixel_sd(idx(v), idx(s));
      const double mean = fields.pixel_mean(idx(v), idx(s));
      // A constant series can leave roundoff-sized spread around its mean.
      if (!(sd > 1e-13 * std::abs(mean)) || sd == 0.0) {
        fail(ErrorCode::ZeroVarianceSeries, "variable '" + data.variable_names()[v] +
                                                "' is constant at location " +
                                                std::to_string(s));
      }
    }
  }

  std::vector<double> out(data.values().size());
  for (std::size_t r = 0; r < m; ++r) {
    Eigen::Map<Matrix> dst(out.data() + p * n * r, idx(p), idx(n));
    dst = (data.realization(r) - fields.pixel_mean).cwiseQuotient(fields.pixel_sd);
  }
  return {Dataset(p, n, m, std::move(out), data.locations(), data.variable_names()),
          std::move(fields)};
}

/// Inverse of standardize(): multiplies by the pixel sd and adds the pixel mean.
inline Dataset destandardize(const Dataset& data, const StandardizationFields& fields) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  require(fields.pixel_mean.rows() == idx(p) &&
              fields.pixel_mean.cols() == idx(n) &&
              fields.pixel_sd.rows() == idx(p) && fields.pixel_sd.cols() == idx(n),
          ErrorCode::DimensionMismatch, "standardization fields do not match the dataset");
  std::vector<double> out(data.values().size());
  for (std::size_t r = 0; r < m; ++r) {
    Eigen::Map<Matrix> dst(out.data() + p * n * r, idx(p), idx(n));
    dst = data.realization(r).cwiseProduct(fields.pixel_sd) + fields.pixel_mean;
  }
  return Dataset(p, n, m, std::move(out), data.locations(), data.variable_names());
}

/// Applies stored fields to new data: (Y - mean) / sd at every pixel.
inline Dataset apply_standardization(const Dataset& data, const StandardizationFields& fields) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  require(fields.pixel_mean.rows() == idx(p) && fields.pixel_mean.cols() == idx(n) &&
              fields.pixel_sd.rows() == idx(p) && fields.pixel_sd.cols() == idx(n),
          ErrorCode::DimensionMismatch, "standardization fields do not match the dataset");
  std::vector<double> out(data.values().size());
  for (std::size_t r = 0; r < m; ++r) {
    Eigen::Map<Matrix> dst(out.data() + p * n * r, idx(p), idx(n));
    dst = (data.realization(r) - fields.pixel_mean).cwiseQuotient(fields.pixel_sd);
  }
  return Dataset(p, n, m, std::move(out), data.locations(), data.variable_names());
}

/// n x (p m) matrix whose columns are the per-variable fields, realizations in
/// order within each variable.
inline Matrix pooled_matrix(const Dataset& data) {
  const auto p = data.n_vars(), n = data.n_locations(), m = data.n_realizations();
  Matrix b(idx(n), idx(p * m));
  for (std::size_t v = 0; v < p; ++v)
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t s = 0; s < n; ++s) b(idx(s), idx(v * m + r)) = data.at(v, s, r);
  return b;
}

namespace detail {

// Flip each column so its largest-magnitude entry (first on ties) is positive.
inline void fix_column_signs(Matrix& u) {
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, c)) > best) {
        best = std::abs(u(r, c));
        arg = r;
      }
    }
    if (u(arg, c) < 0.0) u.col(c) *= -1.0;
  }
}

inline constexpr Eigen::Index kGramPathMinRows = 2000;

}  // namespace detail

/// Pooled EOF basis: the leading L left singular vectors of the pooled data
/// matrix, with cumulative explained-variance fractions.
inline BasisMatrix build_pooled_eof_basis(const Dataset& data, std::size_t levels) {
  const Matrix b = pooled_matrix(data);
  const Eigen::Index n = b.rows(), cols = b.cols();
  require(levels >= 1, ErrorCode::InvalidArgument, "need at least one level");
  require(idx(levels) <= std::min(n, cols), ErrorCode::RankDeficient,
          "requested " + std::to_string(levels) + " levels but the pooled matrix is " +
              std::to_string(n) + " x " + std::to_string(cols));

  Vector singular;
  Matrix u;
  if (n > detail::kGramPathMinRows && cols < n) {
    // B^T B = V D^2 V^T, U = B V D^-1; only the small Gram matrix is decomposed.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.transpose() * b);
    const Vector evals = eig.eigenvalues().reverse().cwiseMax(0.0);
    const Matrix v = eig.eigenvectors().rowwise().reverse();
    singular = evals.cwiseSqrt();
    const auto k = std::min<Eigen::Index>(idx(levels), cols);
    u = Matrix(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      u.col(j) = singular(j) > 0.0 ? Vector(b * v.col(j) / singular(j)) : Vector::Zero(n);
    }
  } else {
    Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU);
    singular = svd.singularValues();
    u = svd.matrixU();
  }

  const double tol = double(std::max(n, cols)) * std::numeric_limits<double>::epsilon() *
                     (singular.size() > 0 ? singular(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < singular.size(); ++j)
    if (singular(j) > tol) ++rank;
  require(idx(levels) <= rank, ErrorCode::RankDeficient,
          "pooled matrix has numerical rank " + std::to_string(rank) + " < " +
              std::to_string(levels) + " requested levels");

  BasisMatrix basis;
  basis.phi = u.leftCols(idx(levels));
  detail::fix_column_signs(basis.phi);
  const double total = singular.squaredNorm();
  double running = 0.0;
  for (std::size_t j = 0; j < levels; ++j) {
    running += singular(idx(j)) * singular(idx(j));
    basis.variance_fraction.push_back(std::min(1.0, running / total));
  }
  return basis;
}

/// Admits a user-supplied basis after checking orthonormality of its columns.
inline BasisMatrix validate_basis(Matrix phi, double tolerance = 1e-8) {
  require(phi.rows() >= 1 && phi.cols() >= 1, ErrorCode::DimensionMismatch, "empty basis");
  require(phi.cols() <= phi.rows(), ErrorCode::NotOrthonormal,
          "basis has more columns than rows");
  const Matrix gram = phi.transpose() * phi;
  Eigen::Index wi = 0, wj = 0;
  const double worst = (gram - Matrix::Identity(phi.cols(), phi.cols())).cwiseAbs().maxCoeff(&wi, &wj);
  if (!(worst <= tolerance)) {
    fail(ErrorCode::NotOrthonormal, "Gram entry (" + std::to_string(wi) + "," +
                                        std::to_string(wj) + ") = " + std::to_string(gram(wi, wj)) +
                                        " deviates from identity by " + std::to_string(worst));
  }
  return BasisMatrix{std::move(phi), {}};
}

}  // namespace mbgl
