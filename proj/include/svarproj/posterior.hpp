#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/linalg.hpp"
#include "svarproj/parallel.hpp"
#include "svarproj/random.hpp"
#include "svarproj/restrictions.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

/// Normal-Wishart hyperparameters.
struct NwHyper {
  Matrix A0bar;  // n x np
  Matrix S0;     // n x n
  Matrix N0;     // np x np
  double v0 = 0.0;

  /// Uninformative limit: A0bar = 0, S0 = I, N0 = 0, v0 = 0.
  static NwHyper flat(int n, int p) {
    const Eigen::Index np = static_cast<Eigen::Index>(n) * p;
    return NwHyper{Matrix::Zero(n, np), Matrix::Identity(n, n), Matrix::Zero(np, np), 0.0};
  }
};

struct NwPosterior {
  Matrix A_bar;  // n x np
  Matrix S;      // n x n
  Matrix K;      // (N0/T + QT)^{-1}
  int T = 0;
};

inline NwPosterior nw_update(const NwHyper& h, const ReducedForm& rf) {
  const Eigen::Index n = rf.n, np = static_cast<Eigen::Index>(rf.n) * rf.p;
  require(h.A0bar.rows() == n && h.A0bar.cols() == np && h.S0.rows() == n && h.S0.cols() == n &&
              h.N0.rows() == np && h.N0.cols() == np,
          ErrorCode::DimensionMismatch, "nw_update: hyperparameter dimensions");
  require(h.v0 >= 0.0, ErrorCode::DomainError, "nw_update: v0 must be non-negative");
  require(rf.QT.rows() == np && rf.T > 0, ErrorCode::DimensionMismatch, "nw_update: reduced form lacks Q_T");
  const double T = rf.T;
  Matrix N0T = h.N0 / T;
  Matrix M = N0T + rf.QT;
  require(std::isfinite(condition_number(M)) && condition_number(M) < 1e14, ErrorCode::SingularUpdate,
          "nw_update: N0/T + Q_T is singular");
  NwPosterior post;
  post.T = rf.T;
  post.K = M.partialPivLu().solve(Matrix::Identity(np, np));
  post.A_bar = rf.A * rf.QT * post.K + h.A0bar * N0T * post.K;
  Matrix dA = post.A_bar - h.A0bar;
  post.S = h.v0 / (T + h.v0) * h.S0 + T / (T + h.v0) * rf.Sigma +
           1.0 / (T + h.v0) * dA * h.N0 * post.K * rf.QT * dA.transpose();
  post.S = symmetrize(post.S);
  post.K = symmetrize(post.K);
  return post;
}

enum class DrawStatus { Ok, Singular };

inline std::string_view to_string(DrawStatus s) { return s == DrawStatus::Ok ? "ok" : "singular"; }

struct PosteriorDraws {
  Matrix draws;  // M x d
  std::string source;
  std::uint64_t seed = 0;
  int n = 0;
  int p = 0;
  std::vector<DrawStatus> status;
  int resampled = 0;  // Wishart Gram matrices redrawn once

  Eigen::Index size() const { return draws.rows(); }
  std::size_t singular_count() const {
    return static_cast<std::size_t>(std::count(status.begin(), status.end(), DrawStatus::Singular));
  }
};

namespace detail {

// Sigma* = S^{1/2} G^{-1} S^{1/2} and A* = A_bar + (Sigma*/T)^{1/2} W K^{1/2}.
inline std::pair<Matrix, Matrix> nw_draw(const NwPosterior& post, const Matrix& S_half, const Matrix& K_half, Rng& rng,
                                         bool& resampled) {
  const Eigen::Index n = post.S.rows();
  resampled = false;
  Matrix G;
  for (int attempt = 0;; ++attempt) {
    Matrix Z = standard_normal_matrix(rng, n, post.T);
    G = Z * Z.transpose() / static_cast<double>(post.T);
    if (std::isfinite(condition_number(G)) && condition_number(G) < 1e12) break;
    require(attempt == 0, ErrorCode::DegenerateWishart, "Wishart Gram matrix singular after a redraw");
    resampled = true;
  }
  Matrix sigma = symmetrize(S_half * G.ldlt().solve(S_half));
  Matrix W = standard_normal_matrix(rng, n, post.K.rows());
  Matrix A = post.A_bar + symmetric_sqrt(sigma / static_cast<double>(post.T)) * W * K_half;
  return {std::move(A), std::move(sigma)};
}

inline DrawStatus status_of(const Vector& mu, int n, int p) {
  auto u = unpack_mu(mu, n, p);
  return mu.allFinite() && is_positive_definite(u.Sigma) ? DrawStatus::Ok : DrawStatus::Singular;
}

}  // namespace detail

/// Draws from the Normal-Wishart posterior. Draw m depends only on (seed, m).
inline PosteriorDraws nw_posterior_draws(const NwHyper& hyper, const ReducedForm& rf, int M, std::uint64_t seed,
                                         int threads = 1) {
  require(M >= 1, ErrorCode::DomainError, "nw_posterior_draws: M must be >= 1");
  require(rf.T > rf.n + 1, ErrorCode::ShortSample, "nw_posterior_draws: need T > n + 1");
  NwPosterior post = nw_update(hyper, rf);
  const Matrix S_half = symmetric_sqrt(post.S);
  const Matrix K_half = symmetric_sqrt(post.K);
  PosteriorDraws out;
  out.source = "normal_wishart";
  out.seed = seed;
  out.n = rf.n;
  out.p = rf.p;
  out.draws.resize(M, rf.d());
  out.status.assign(static_cast<std::size_t>(M), DrawStatus::Ok);
  std::vector<char> redrawn(static_cast<std::size_t>(M), 0);
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    Rng rng = make_rng(seed, {0x4e57ULL, static_cast<std::uint64_t>(m)});
    bool again = false;
    auto [A, S] = detail::nw_draw(post, S_half, K_half, rng, again);
    redrawn[m] = again;
    out.draws.row(static_cast<Eigen::Index>(m)) = pack_mu(A, S).transpose();
    out.status[m] = detail::status_of(out.draws.row(static_cast<Eigen::Index>(m)).transpose(), rf.n, rf.p);
  });
  out.resampled = static_cast<int>(std::count(redrawn.begin(), redrawn.end(), 1));
  return out;
}

/// mu* = mu_hat + chol(Omega/T) xi; rows whose Sigma is not positive definite
/// are kept and flagged.
inline PosteriorDraws gaussian_posterior_draws(const ReducedForm& rf, int M, std::uint64_t seed) {
  require(M >= 1, ErrorCode::DomainError, "gaussian_posterior_draws: M must be >= 1");
  require(rf.Omega.rows() == rf.d() && rf.T > 0, ErrorCode::DimensionMismatch,
          "gaussian_posterior_draws: reduced form lacks Omega");
  const Matrix F = psd_factor(symmetrize(rf.Omega) / static_cast<double>(rf.T));
  PosteriorDraws out;
  out.source = "gaussian_approx";
  out.seed = seed;
  out.n = rf.n;
  out.p = rf.p;
  out.draws.resize(M, rf.d());
  out.status.resize(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    Rng rng = make_rng(seed, {0x9a55ULL, static_cast<std::uint64_t>(m)});
    Vector mu = rf.mu + F * standard_normal_vector(rng, rf.d());
    out.draws.row(m) = mu.transpose();
    out.status[static_cast<std::size_t>(m)] = detail::status_of(mu, rf.n, rf.p);
  }
  return out;
}

/// Columnar CSV: draw, status, mu_1..mu_d.
inline void write_draws_csv(std::ostream& os, const PosteriorDraws& d) {
  os << "draw,status";
  for (Eigen::Index k = 0; k < d.draws.cols(); ++k) os << ",mu_" << k + 1;
  os << '\n';
  os.precision(17);
  for (Eigen::Index m = 0; m < d.draws.rows(); ++m) {
    os << m << ',' << to_string(d.status[static_cast<std::size_t>(m)]);
    for (Eigen::Index k = 0; k < d.draws.cols(); ++k) os << ',' << d.draws(m, k);
    os << '\n';
  }
}

/// Linear-interpolation sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorCode::NoValidDraws, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct UhligBand {
  Target target;
  double lower = 0.0;  // alpha/2 quantile
  double upper = 0.0;  // 1 - alpha/2 quantile
  double min = 0.0;
  double max = 0.0;
};

struct UhligResult {
  std::vector<UhligBand> bands;
  int draws = 0;
  int accepted = 0;
  double acceptance_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Flips column j of B when that alone turns its failing restrictions into
/// satisfied ones.
inline void sign_fix_columns(Matrix& B, const std::vector<ConstraintRow>& rows) {
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    bool ok = true, flipped_ok = true, any = false;
    Matrix negated = B;
    negated.col(j) = -B.col(j);
    for (const auto& r : rows) {
      if (r.shock != j) continue;
      any = true;
      const double tol = r.sense == Sense::Eq ? 1e-10 : 0.0;
      auto holds = [&](const Matrix& M) {
        const double s = r.slack(M);
        return r.sense == Sense::Eq ? std::abs(s) <= tol : s >= 0.0;
      };
      ok = ok && holds(B);
      flipped_ok = flipped_ok && holds(negated);
    }
    if (any && !ok && flipped_ok) B.col(j) = -B.col(j);
  }
}

/// Bayesian baseline: Normal-Wishart draws of mu with Haar rotations, kept
/// when the restrictions hold; equal-tailed pointwise bands per target.
inline UhligResult uhlig_credible_bands(const NwHyper& hyper, const ReducedForm& rf, const RestrictionSet& rset,
                                        const std::vector<Target>& targets, double alpha, int M, std::uint64_t seed) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::DomainError, "uhlig_credible_bands: alpha must lie in (0, 1)");
  require(M >= 1, ErrorCode::DomainError, "uhlig_credible_bands: M must be >= 1");
  require(rf.T > rf.n + 1, ErrorCode::ShortSample, "uhlig_credible_bands: need T > n + 1");
  validate(rset, rf.n);
  NwPosterior post = nw_update(hyper, rf);
  const Matrix S_half = symmetric_sqrt(post.S);
  const Matrix K_half = symmetric_sqrt(post.K);
  std::vector<std::vector<double>> values(targets.size());
  UhligResult out;
  out.draws = M;
  for (int m = 0; m < M; ++m) {
    Rng rng = make_rng(seed, {0x4e57ULL, static_cast<std::uint64_t>(m)});
    bool again = false;
    auto [A, S] = detail::nw_draw(post, S_half, K_half, rng, again);
    Rng qrng = make_rng(seed, {0x0a1eULL, static_cast<std::uint64_t>(m)});
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) continue;
    std::vector<ConstraintRow> rows;
    try {
      rows = constraint_rows(A, S, rset);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnitRoot) continue;
      throw;
    }
    Matrix B = Matrix(llt.matrixL()) * haar_orthogonal(qrng, rf.n);
    sign_fix_columns(B, rows);
    bool ok = true;
    for (const auto& r : rows) {
      const double s = r.slack(B);
      if (r.sense == Sense::Eq ? std::abs(s) > 1e-10 : s < 0.0) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    ++out.accepted;
    for (std::size_t h = 0; h < targets.size(); ++h) values[h].push_back(structural_irf(A, B, targets[h]));
  }
  out.acceptance_rate = static_cast<double>(out.accepted) / M;
  if (out.acceptance_rate < 1e-3)
    out.warnings.push_back("LowAcceptance: acceptance rate " + std::to_string(out.acceptance_rate));
  require(out.accepted > 0, ErrorCode::NoValidDraws, "uhlig_credible_bands: no draw satisfied the restrictions");
  for (std::size_t h = 0; h < targets.size(); ++h) {
    auto& v = values[h];
    std::sort(v.begin(), v.end());
    out.bands.push_back(
        UhligBand{targets[h], sorted_quantile(v, alpha / 2.0), sorted_quantile(v, 1.0 - alpha / 2.0), v.front(), v.back()});
  }
  return out;
}

}  // namespace svarproj
