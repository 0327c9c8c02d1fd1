#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "svarproj/common.hpp"

namespace svarproj {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mixes a base seed with a list of counters (draw index, target, direction, ...).
/// Draw m of any sampler depends only on (seed, counters), never on call order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = splitmix64(seed);
  for (auto c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  return Rng(derive_seed(seed, counters));
}

inline Vector standard_normal_vector(Rng& rng, Eigen::Index size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = normal(rng);
  return v;
}

inline Matrix standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R forced positive.
inline Matrix haar_orthogonal(Rng& rng, Eigen::Index n) {
  Matrix g = standard_normal_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Uniform point in the ball of squared radius c (radial rescaling of a Gaussian).
inline Vector uniform_in_ball(Rng& rng, Eigen::Index dim, double c) {
  Vector g = standard_normal_vector(rng, dim);
  double norm = g.norm();
  if (norm == 0.0 || c <= 0.0) return Vector::Zero(dim);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double radius = std::sqrt(c) * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
  return g * (radius / norm);
}

}  // namespace svarproj
