#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "svarproj/common.hpp"

namespace svarproj {

/// Column-stacking vec.
inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  require(v.size() == rows * cols, ErrorCode::DimensionMismatch, "unvec size");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Eigen::Index vech_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// Lower triangle, column by column.
inline Vector vech(const Matrix& s) {
  const Eigen::Index n = s.rows();
  Vector v(vech_size(n));
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v(pos++) = s(i, j);
  return v;
}

inline Matrix unvech(const Vector& v, Eigen::Index n) {
  require(v.size() == vech_size(n), ErrorCode::DimensionMismatch, "unvech size");
  Matrix s(n, n);
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      s(i, j) = v(pos);
      s(j, i) = v(pos);
      ++pos;
    }
  return s;
}

/// Duplication matrix D_n: D * vech(S) = vec(S) for symmetric S.
inline Matrix duplication_matrix(Eigen::Index n) {
  Matrix d = Matrix::Zero(n * n, vech_size(n));
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      d(j * n + i, pos) = 1.0;
      d(i * n + j, pos) = 1.0;
      ++pos;
    }
  return d;
}

/// Elimination matrix L_n: L * vec(S) = vech(S).
inline Matrix elimination_matrix(Eigen::Index n) {
  Matrix l = Matrix::Zero(vech_size(n), n * n);
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) l(pos++, j * n + i) = 1.0;
  return l;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Symmetric (eigendecomposition) square root of a PSD matrix; negative
/// eigenvalues from rounding are clipped at zero.
inline Matrix symmetric_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Ratio of extreme singular values; infinity for an exactly singular matrix.
inline double condition_number(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  double smax = s(0);
  double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

/// Lower Cholesky factor of a PSD matrix. Falls back to a pivoted LDLT when the
/// plain factorization fails (semidefinite input), returning a square root R
/// with R R' = S.
inline Matrix psd_factor(const Matrix& s) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  return symmetric_sqrt(s);
}

inline bool is_positive_definite(const Matrix& s) {
  if (s.rows() == 0) return false;
  if (!s.allFinite()) return false;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) return false;
  return llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

}  // namespace svarproj
