#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/linalg.hpp"
#include "svarproj/parallel.hpp"
#include "svarproj/random.hpp"
#include "svarproj/restrictions.hpp"
#include "svarproj/solver.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

struct IdentifiedSetBounds {
  Target target;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  Matrix argmin_B;
  Matrix argmax_B;
  bool feasible = false;
};

struct IdsetConfig {
  SolverConfig solver;
  int starts = 10;
  int batch_starts = 4;
  // Cheap rotation draws screened for feasibility; the best feasible draw per
  // direction is added as an extra start.
  int scan_draws = 100;
  int empty_scan_draws = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
};

enum class BoundStatus { Ok, Empty, Singular };

inline std::string_view to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Ok: return "ok";
    case BoundStatus::Empty: return "empty";
    case BoundStatus::Singular: return "singular";
  }
  return "unknown";
}

/// Flip column signs of Q so that B = L Q satisfies as many inequality rows
/// of each shock as possible (ties keep the draw).
inline void sign_adjust(Matrix& Q, const Matrix& L, const std::vector<ConstraintRow>& rows) {
  const Eigen::Index n = Q.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector b = L * Q.col(j);
    int plus = 0, minus = 0;
    for (const auto& r : rows) {
      if (r.shock != j || r.sense == Sense::Eq) continue;
      double v = r.c.dot(b);
      double s = r.sense == Sense::Geq ? 1.0 : -1.0;
      if (s * (v - r.bound) >= 0.0) ++plus;
      if (s * (-v - r.bound) >= 0.0) ++minus;
    }
    if (minus > plus) Q.col(j) = -Q.col(j);
  }
}

/// Random orthogonal Q whose columns satisfy the zero rows exactly
/// (c'L q_j = 0). Without zero rows this is a Haar draw. Columns with more
/// zero rows are filled first; returns nullopt when the zero rows leave no room.
inline std::optional<Matrix> draw_rotation(Rng& rng, const Matrix& L, const std::vector<ConstraintRow>& rows) {
  const Eigen::Index n = L.rows();
  std::vector<std::vector<Vector>> zeros(static_cast<std::size_t>(n));
  bool any = false;
  for (const auto& r : rows) {
    if (r.sense != Sense::Eq) continue;
    zeros[static_cast<std::size_t>(r.shock)].push_back(L.transpose() * r.c);
    any = true;
  }
  if (!any) return haar_orthogonal(rng, n);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return zeros[static_cast<std::size_t>(a)].size() > zeros[static_cast<std::size_t>(b)].size();
  });

  Matrix Q(n, n);
  std::vector<Vector> chosen;
  for (Eigen::Index j : order) {
    const auto& z = zeros[static_cast<std::size_t>(j)];
    Matrix M(n, static_cast<Eigen::Index>(z.size() + chosen.size()));
    Eigen::Index col = 0;
    for (const auto& v : z) M.col(col++) = v;
    for (const auto& v : chosen) M.col(col++) = v;
    Vector g = standard_normal_vector(rng, n);
    if (M.cols() > 0) {
      Eigen::ColPivHouseholderQR<Matrix> qr(M);
      qr.setThreshold(1e-12);
      const Eigen::Index rank = qr.rank();
      if (rank >= n) return std::nullopt;
      Matrix U = Matrix(qr.householderQ()).leftCols(rank);
      g -= U * (U.transpose() * g);
    }
    double norm = g.norm();
    if (!(norm > 1e-12)) return std::nullopt;
    Q.col(j) = g / norm;
    chosen.push_back(Q.col(j));
  }
  return Q;
}

/// Inner problem at a fixed (A, Sigma): extrema of e_i' C_k B e_j over
/// BB' = Sigma and the restriction rows. Start rotations and the feasibility
/// scan are shared across targets.
class IdentifiedSetProblem {
 public:
  IdentifiedSetProblem(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset, const IdsetConfig& config,
                       std::uint64_t stream, int starts)
      : A_(A), Sigma_(Sigma), config_(config), stream_(stream) {
    n_ = Sigma.rows();
    require(A.rows() == n_ && A.cols() % n_ == 0, ErrorCode::DimensionMismatch, "identified set: A must be n x np");
    Eigen::LLT<Matrix> llt(Sigma);
    require(llt.info() == Eigen::Success && is_positive_definite(Sigma), ErrorCode::SingularSigma,
            "identified set: Sigma is not positive definite");
    L_ = llt.matrixL();
    rows_ = constraint_rows(A, Sigma, rset);
    for (const auto& r : rows_) (r.sense == Sense::Eq ? n_eq_rows_ : n_ineq_rows_)++;

    for (int s = 0; s < std::max(1, starts); ++s) {
      Rng rng = make_rng(stream_, {1, static_cast<std::uint64_t>(s)});
      auto Q = draw_rotation(rng, L_, rows_);
      if (!Q) Q = haar_orthogonal(rng, n_);
      if (s == 0) sign_adjust(*Q, L_, rows_);
      starts_.push_back(L_ * *Q);
    }
    scan(config_.scan_draws, 2);
  }

  Eigen::Index n() const { return n_; }
  const Matrix& cholesky() const { return L_; }
  const std::vector<ConstraintRow>& rows() const { return rows_; }

  /// Max constraint violation of B (restriction rows and BB' = Sigma).
  double violation(const Matrix& B) const { return constraint_violation(evaluate_at(B, Vector::Zero(n_ * n_))); }

  bool feasible(const Matrix& B) const { return violation(B) <= config_.solver.feas_tol; }

  /// Bounds for one target. `warm` holds extra candidate B matrices.
  IdentifiedSetBounds bounds(const Target& target, const std::vector<Matrix>& warm = {}) {
    require(target.i >= 0 && target.i < n_ && target.j >= 0 && target.j < n_ && target.k >= 0,
            ErrorCode::DimensionMismatch, "identified set: target out of range");
    const Vector r = response_matrix(A_, target.k, target.cumulative).row(target.i).transpose();
    Vector grad = Vector::Zero(n_ * n_);
    grad.segment(static_cast<Eigen::Index>(target.j) * n_, n_) = r;

    IdentifiedSetBounds out;
    out.target = target;
    auto hi = extremum(grad, Direction::Maximize, warm);
    auto lo = extremum(grad, Direction::Minimize, warm);
    if (!hi || !lo) {
      if (!feasible_found_) scan(config_.empty_scan_draws, 3);
      if (!feasible_found_)
        throw Error(ErrorCode::EmptyIdentifiedSet, "identified set is empty: no feasible start or rotation draw");
      hi = extremum(grad, Direction::Maximize, warm);
      lo = extremum(grad, Direction::Minimize, warm);
      require(hi && lo, ErrorCode::EmptyIdentifiedSet, "identified set: solver did not reach feasibility");
    }
    out.upper = hi->first;
    out.argmax_B = hi->second;
    out.lower = lo->first;
    out.argmin_B = lo->second;
    out.feasible = true;
    return out;
  }

 private:
  NlpEvaluation evaluate_at(const Matrix& B, const Vector& grad) const {
    NlpEvaluation e;
    e.objective = grad.dot(Eigen::Map<const Vector>(B.data(), n_ * n_));
    e.equalities.resize(vech_size(n_) + n_eq_rows_);
    e.inequalities.resize(n_ineq_rows_);
    e.equalities.head(vech_size(n_)) = vech(B * B.transpose() - Sigma_);
    Eigen::Index ie = vech_size(n_), ii = 0;
    for (const auto& row : rows_) {
      if (row.sense == Sense::Eq)
        e.equalities(ie++) = row.slack(B);
      else
        e.inequalities(ii++) = row.slack(B);
    }
    return e;
  }

  NlpDerivatives derivatives_at(const Matrix& B, const Vector& grad) const {
    const Eigen::Index m = n_ * n_;
    NlpDerivatives d;
    d.gradient = grad;
    d.equality_jacobian = Matrix::Zero(vech_size(n_) + n_eq_rows_, m);
    d.inequality_jacobian = Matrix::Zero(n_ineq_rows_, m);
    // d(BB')_{ab} / dB_{ck} = [a=c] B_{bk} + [b=c] B_{ak}
    Eigen::Index pos = 0;
    for (Eigen::Index b = 0; b < n_; ++b) {
      for (Eigen::Index a = b; a < n_; ++a, ++pos) {
        for (Eigen::Index k = 0; k < n_; ++k) {
          d.equality_jacobian(pos, k * n_ + a) += B(b, k);
          d.equality_jacobian(pos, k * n_ + b) += B(a, k);
        }
      }
    }
    Eigen::Index ie = vech_size(n_), ii = 0;
    for (const auto& row : rows_) {
      const Eigen::Index off = static_cast<Eigen::Index>(row.shock) * n_;
      if (row.sense == Sense::Eq)
        d.equality_jacobian.block(ie++, off, 1, n_) = row.c.transpose();
      else
        d.inequality_jacobian.block(ii++, off, 1, n_) = (row.sense == Sense::Geq ? 1.0 : -1.0) * row.c.transpose();
    }
    return d;
  }

  void scan(int draws, std::uint64_t tag) {
    for (int s = 0; s < draws; ++s) {
      Rng rng = make_rng(stream_, {tag, static_cast<std::uint64_t>(s)});
      auto Q = draw_rotation(rng, L_, rows_);
      if (!Q) continue;
      sign_adjust(*Q, L_, rows_);
      Matrix B = L_ * *Q;
      if (feasible(B)) {
        feasible_found_ = true;
        candidates_.push_back(std::move(B));
      }
    }
  }

  std::optional<std::pair<double, Matrix>> extremum(const Vector& grad, Direction dir, const std::vector<Matrix>& warm) {
    const Eigen::Index m = n_ * n_;
    const bool maximize = dir == Direction::Maximize;
    auto better = [maximize](double a, double b) { return maximize ? a > b : a < b; };

    std::optional<std::pair<double, Matrix>> best;
    auto offer = [&](const Matrix& B) {
      if (!feasible(B)) return;
      double v = grad.dot(Eigen::Map<const Vector>(B.data(), m));
      if (!best || better(v, best->first)) best = std::make_pair(v, B);
    };
    for (const auto& B : candidates_) offer(B);
    for (const auto& B : warm) offer(B);

    NlpProblem problem;
    problem.dimension = m;
    problem.evaluate = [&](const Vector& x) { return evaluate_at(Eigen::Map<const Matrix>(x.data(), n_, n_), grad); };
    problem.derivatives = [&](const Vector& x) {
      return derivatives_at(Eigen::Map<const Matrix>(x.data(), n_, n_), grad);
    };
    for (const auto& B : starts_) problem.starts.emplace_back(Eigen::Map<const Vector>(B.data(), m));
    if (best) problem.starts.emplace_back(Eigen::Map<const Vector>(best->second.data(), m));
    for (const auto& B : warm) problem.starts.emplace_back(Eigen::Map<const Vector>(B.data(), m));

    try {
      NlpSolution sol = solve(problem, dir, config_.solver);
      feasible_found_ = true;
      Matrix B = Eigen::Map<const Matrix>(sol.x.data(), n_, n_);
      if (!best || better(sol.value, best->first)) best = std::make_pair(sol.value, B);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoFeasibleStart) throw;
    }
    return best;
  }

  Matrix A_;
  Matrix Sigma_;
  Matrix L_;
  IdsetConfig config_;
  std::uint64_t stream_;
  Eigen::Index n_ = 0;
  Eigen::Index n_eq_rows_ = 0;
  Eigen::Index n_ineq_rows_ = 0;
  std::vector<ConstraintRow> rows_;
  std::vector<Matrix> starts_;
  std::vector<Matrix> candidates_;
  bool feasible_found_ = false;
};

namespace detail {

inline std::uint64_t row_stream(std::uint64_t seed, std::size_t row) {
  return derive_seed(seed, {0x1d5e7ULL, static_cast<std::uint64_t>(row)});
}

inline Matrix checked_sigma(const Matrix& Sigma) {
  require(Sigma.allFinite() && is_positive_definite(Sigma), ErrorCode::SingularSigma,
          "reduced form: Sigma is not positive definite");
  return Sigma;
}

}  // namespace detail

inline IdentifiedSetBounds bounds(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset, const Target& target,
                                  const IdsetConfig& config = {}) {
  require_sign_normalization(rset, static_cast<int>(Sigma.rows()));
  IdentifiedSetProblem problem(A, detail::checked_sigma(Sigma), rset, config, detail::row_stream(config.seed, 0),
                               config.starts);
  return problem.bounds(target);
}

inline IdentifiedSetBounds bounds(const Vector& mu, const VarSpec& spec, const RestrictionSet& rset,
                                  const Target& target, const IdsetConfig& config = {}) {
  require(mu.size() == mu_size(spec.n, spec.p), ErrorCode::DimensionMismatch, "bounds: mu has the wrong length");
  auto u = unpack_mu(mu, spec.n, spec.p);
  return bounds(u.A, u.Sigma, rset, target, config);
}

struct BatchBounds {
  std::vector<Target> targets;
  Matrix lower;  // draws x targets
  Matrix upper;
  std::vector<BoundStatus> status;

  std::size_t rows() const { return status.size(); }
};

/// Bounds for every row of `mu_draws` and every target. Row m uses its own
/// seed stream, so results do not depend on scheduling; bad rows are marked.
inline BatchBounds bounds_batch(const Matrix& mu_draws, const VarSpec& spec, const RestrictionSet& rset,
                                const std::vector<Target>& targets, const IdsetConfig& config = {}) {
  require(mu_draws.cols() == mu_size(spec.n, spec.p), ErrorCode::DimensionMismatch,
          "bounds_batch: draws have the wrong width");
  require_sign_normalization(rset, spec.n);
  const auto M = static_cast<std::size_t>(mu_draws.rows());
  const auto H = static_cast<Eigen::Index>(targets.size());
  BatchBounds out;
  out.targets = targets;
  out.lower = Matrix::Constant(static_cast<Eigen::Index>(M), H, std::numeric_limits<double>::quiet_NaN());
  out.upper = out.lower;
  out.status.assign(M, BoundStatus::Ok);

  parallel_for(M, config.threads, [&](std::size_t m) {
    const auto row = static_cast<Eigen::Index>(m);
    auto u = unpack_mu(mu_draws.row(row).transpose(), spec.n, spec.p);
    if (!u.Sigma.allFinite() || !u.A.allFinite() || !is_positive_definite(u.Sigma)) {
      out.status[m] = BoundStatus::Singular;
      return;
    }
    try {
      IdentifiedSetProblem problem(u.A, u.Sigma, rset, config, detail::row_stream(config.seed, m), config.batch_starts);
      for (Eigen::Index h = 0; h < H; ++h) {
        auto b = problem.bounds(targets[static_cast<std::size_t>(h)]);
        out.lower(row, h) = b.lower;
        out.upper(row, h) = b.upper;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyIdentifiedSet) {
        out.status[m] = BoundStatus::Empty;
      } else if (e.code() == ErrorCode::SingularSigma || e.code() == ErrorCode::UnitRoot) {
        out.status[m] = BoundStatus::Singular;
      } else {
        throw;
      }
      out.lower.row(row).setConstant(std::numeric_limits<double>::quiet_NaN());
      out.upper.row(row).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  });
  return out;
}

/// Columnar CSV: draw, target, lower, upper, status. Targets are written one-based.
inline void write_batch_csv(std::ostream& os, const BatchBounds& batch) {
  os << "draw,k,i,j,cumulative,lower,upper,status\n";
  os.precision(17);
  for (std::size_t m = 0; m < batch.rows(); ++m) {
    for (std::size_t h = 0; h < batch.targets.size(); ++h) {
      const auto& t = batch.targets[h];
      os << m << ',' << t.k << ',' << t.i + 1 << ',' << t.j + 1 << ',' << (t.cumulative ? 1 : 0) << ','
         << batch.lower(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(h)) << ','
         << batch.upper(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(h)) << ','
         << to_string(batch.status[m]) << '\n';
    }
  }
}

namespace detail {

// Brute-force sweep: feasibility uses exact inequality slacks and a tolerance
// on zero rows scaled to the rotation spacing.
inline IdentifiedSetBounds oracle_sweep(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset,
                                        const Target& target, const std::vector<Matrix>& rotations, double eq_tol) {
  const Eigen::Index n = Sigma.rows();
  Eigen::LLT<Matrix> llt(checked_sigma(Sigma));
  Matrix L = llt.matrixL();
  auto rows = constraint_rows(A, Sigma, rset);
  Vector r = response_matrix(A, target.k, target.cumulative).row(target.i).transpose();
  IdentifiedSetBounds out;
  out.target = target;
  out.lower = std::numeric_limits<double>::infinity();
  out.upper = -std::numeric_limits<double>::infinity();
  for (const auto& Q : rotations) {
    require(Q.rows() == n && Q.cols() == n, ErrorCode::DimensionMismatch, "oracle: rotation size");
    Matrix B = L * Q;
    bool ok = true;
    for (const auto& row : rows) {
      double s = row.slack(B);
      if (row.sense == Sense::Eq ? std::abs(s) > eq_tol * (1.0 + row.c.norm()) : s < 0.0) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    double v = r.dot(B.col(target.j));
    if (v > out.upper) {
      out.upper = v;
      out.argmax_B = B;
    }
    if (v < out.lower) {
      out.lower = v;
      out.argmin_B = B;
    }
    out.feasible = true;
  }
  require(out.feasible, ErrorCode::EmptyIdentifiedSet, "oracle: no feasible rotation");
  return out;
}

}  // namespace detail

/// Exhaustive angle sweep for n = 2 over rotations and reflections.
inline IdentifiedSetBounds oracle_bounds_2d(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset,
                                            const Target& target, int grid) {
  require(Sigma.rows() == 2, ErrorCode::DimensionMismatch, "oracle_bounds_2d: n must be 2");
  require(grid > 0, ErrorCode::DomainError, "oracle_bounds_2d: grid must be positive");
  std::vector<Matrix> rotations;
  rotations.reserve(static_cast<std::size_t>(2 * grid));
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int g = 0; g < grid; ++g) {
    const double t = two_pi * g / grid;
    const double c = std::cos(t), s = std::sin(t);
    Matrix rot(2, 2), ref(2, 2);
    rot << c, -s, s, c;
    ref << c, s, s, -c;
    rotations.push_back(rot);
    rotations.push_back(ref);
  }
  const double spacing = two_pi / grid * std::sqrt(Sigma.trace());
  return detail::oracle_sweep(A, Sigma, rset, target, rotations, spacing);
}

inline IdentifiedSetBounds oracle_bounds_2d(const Vector& mu, const VarSpec& spec, const RestrictionSet& rset,
                                            const Target& target, int grid) {
  auto u = unpack_mu(mu, spec.n, spec.p);
  return oracle_bounds_2d(u.A, u.Sigma, rset, target, grid);
}

/// Extrema over the given rotations only.
inline IdentifiedSetBounds oracle_bounds_rotations(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset,
                                                   const Target& target, const std::vector<Matrix>& rotations) {
  return detail::oracle_sweep(A, Sigma, rset, target, rotations, 1e-8);
}

/// Extrema over `samples` Haar rotations. An inner approximation: the true
/// identified set contains the result.
inline IdentifiedSetBounds oracle_bounds_haar(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset,
                                              const Target& target, int samples, std::uint64_t seed) {
  require(samples > 0, ErrorCode::DomainError, "oracle_bounds_haar: samples must be positive");
  std::vector<Matrix> rotations;
  rotations.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    Rng rng = make_rng(seed, {0x4aa7ULL, static_cast<std::uint64_t>(s)});
    rotations.push_back(haar_orthogonal(rng, Sigma.rows()));
  }
  return detail::oracle_sweep(A, Sigma, rset, target, rotations, 1e-8);
}

inline IdentifiedSetBounds oracle_bounds_haar(const Vector& mu, const VarSpec& spec, const RestrictionSet& rset,
                                              const Target& target, int samples, std::uint64_t seed) {
  auto u = unpack_mu(mu, spec.n, spec.p);
  return oracle_bounds_haar(u.A, u.Sigma, rset, target, samples, seed);
}

}  // namespace svarproj
