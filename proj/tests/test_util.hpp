#pragma once

#include <cmath>
#include <cstdint>

#include "svarproj/random.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj::test {

/// Random VAR(p) slope matrix with companion spectral radius `radius`.
inline Matrix random_stable_A(Rng& rng, int n, int p, double radius = 0.8) {
  Matrix A = standard_normal_matrix(rng, n, static_cast<Eigen::Index>(n) * p) * 0.5;
  double r = stability_margin(A);
  if (r == 0.0) return A;
  double s = radius / r;
  for (int m = 1; m <= p; ++m) A.middleCols(static_cast<Eigen::Index>(m - 1) * n, n) *= std::pow(s, m);
  return A;
}

inline Matrix random_spd(Rng& rng, int n, double ridge = 0.5) {
  Matrix g = standard_normal_matrix(rng, n, n);
  return g * g.transpose() / n + ridge * Matrix::Identity(n, n);
}

/// Y_t = A X_t + chol(Sigma) e_t with Gaussian e_t; `burn` draws discarded.
inline TimeSeriesData simulate_var(const Matrix& A, const Matrix& Sigma, Eigen::Index rows, std::uint64_t seed,
                                   int burn = 200) {
  const Eigen::Index n = A.rows();
  const int p = static_cast<int>(A.cols() / n);
  Matrix L = Sigma.llt().matrixL();
  Rng rng = make_rng(seed, {0x5eedULL});
  const Eigen::Index total = rows + burn + p;
  Matrix y = Matrix::Zero(total, n);
  for (Eigen::Index t = p; t < total; ++t) {
    Vector yt = L * standard_normal_vector(rng, n);
    for (int m = 1; m <= p; ++m) yt += A.middleCols(static_cast<Eigen::Index>(m - 1) * n, n) * y.row(t - m).transpose();
    y.row(t) = yt.transpose();
  }
  TimeSeriesData data;
  data.values = y.bottomRows(rows);
  for (Eigen::Index i = 0; i < n; ++i) data.names.push_back("y" + std::to_string(i + 1));
  return data;
}

/// Reduced form assembled from given parameters (QT left as identity).
inline ReducedForm manual_rf(const Matrix& A, const Matrix& Sigma, const Matrix& Omega, int T) {
  ReducedForm rf;
  rf.n = static_cast<int>(Sigma.rows());
  rf.p = static_cast<int>(A.cols() / Sigma.rows());
  rf.T = T;
  rf.A = A;
  rf.Sigma = Sigma;
  rf.mu = pack_mu(A, Sigma);
  rf.Omega = Omega;
  rf.QT = Matrix::Identity(A.cols(), A.cols());
  return rf;
}

inline Matrix scalar(double v) {
  Matrix m(1, 1);
  m << v;
  return m;
}

}  // namespace svarproj::test
