#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>

#include "mbgl/error.hpp"

namespace mbgl {

template <class T>
constexpr Eigen::Index idx(T value) {
  return static_cast<Eigen::Index>(value);
}

}  // namespace mbgl

namespace mbgl::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double max_asymmetry(const Matrix& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Cholesky factorization or nullopt when the matrix is not numerically PD.
inline std::optional<Eigen::LLT<Matrix>> try_cholesky(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixL().toDenseMatrix().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) return std::nullopt;
  }
  return llt;
}

inline Eigen::LLT<Matrix> cholesky(const Matrix& a, const std::string& what) {
  auto llt = try_cholesky(a);
  if (!llt) fail(ErrorCode::NotPositiveDefinite, what + " is not positive definite");
  return *std::move(llt);
}

inline double log_det(const Eigen::LLT<Matrix>& llt) {
  const Matrix& l = llt.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

inline Matrix inverse(const Eigen::LLT<Matrix>& llt) {
  const auto n = llt.matrixLLT().rows();
  return symmetrized(llt.solve(Matrix::Identity(n, n)));
}

inline Matrix spd_inverse(const Matrix& a, const std::string& what) {
  return inverse(cholesky(a, what));
}

}  // namespace mbgl::linalg
