#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

#include "svarproj/chi2.hpp"
#include "svarproj/common.hpp"
#include "svarproj/idset.hpp"
#include "svarproj/linalg.hpp"
#include "svarproj/parallel.hpp"
#include "svarproj/random.hpp"
#include "svarproj/restrictions.hpp"
#include "svarproj/solver.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

/// {mu : T (center - mu)' Omega^{-1} (center - mu) <= c}
struct WaldEllipsoid {
  Vector center;
  Matrix Omega;
  double T = 0.0;
  double c = 0.0;

  double form(const Vector& mu) const {
    require(mu.size() == center.size(), ErrorCode::DimensionMismatch, "WaldEllipsoid: dimension");
    Vector diff = center - mu;
    if (diff.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    Eigen::LDLT<Matrix> ldlt(Omega);
    return T * diff.dot(ldlt.solve(diff));
  }

  bool contains(const Vector& mu, double tol = 1e-6) const { return form(mu) <= c + tol; }
};

inline WaldEllipsoid wald_ellipsoid(const ReducedForm& rf, double c) {
  require(c >= 0.0, ErrorCode::DomainError, "wald_ellipsoid: c must be non-negative");
  return WaldEllipsoid{rf.mu, regularize_covariance(rf.Omega).Omega, static_cast<double>(rf.T), c};
}

inline SolverConfig outer_solver_defaults() {
  SolverConfig s;
  s.central_differences = true;
  return s;
}

struct ProjectionConfig {
  IdsetConfig inner;
  SolverConfig solver = outer_solver_defaults();
  int starts = 5;
  std::uint64_t seed = 0;
  bool strict_stability = false;
  int threads = 1;
};

enum class EndpointStatus { Ok, EmptyAtCenter, Failed };

inline std::string_view to_string(EndpointStatus s) {
  switch (s) {
    case EndpointStatus::Ok: return "ok";
    case EndpointStatus::EmptyAtCenter: return "empty_at_center";
    case EndpointStatus::Failed: return "failed";
  }
  return "unknown";
}

struct EndpointResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  EndpointStatus status = EndpointStatus::Failed;
  Vector mu;  // optimizing reduced form
  Matrix B;
  double wald = std::numeric_limits<double>::quiet_NaN();
  double stability_margin = std::numeric_limits<double>::quiet_NaN();
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  int start_index = -1;
  int starts_used = 0;
  bool used_fallback = false;
  std::string message;
};

struct ProjectionInterval {
  Target target;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double plugin_lower = std::numeric_limits<double>::quiet_NaN();
  double plugin_upper = std::numeric_limits<double>::quiet_NaN();
  EndpointStatus status = EndpointStatus::Failed;
  EndpointResult lower_detail;
  EndpointResult upper_detail;
};

struct ProjectionRegion {
  double c = 0.0;
  std::vector<ProjectionInterval> intervals;

  std::size_t size() const { return intervals.size(); }
  double effective_dof(double prob) const { return svarproj::effective_dof(c, prob); }
  /// 1 - alpha such that chi2_quantile(d, 1 - alpha) = c.
  static double level_equivalent(double c, Eigen::Index d) { return chi2_cdf(static_cast<double>(d), c); }
};

/// Outer problem: extremes of a structural response over every reduced form
/// in the Wald ellipsoid of squared radius c. Variables are x = (z, vec B)
/// with mu = mu_hat + chol(Omega / T) z, so the ellipsoid is |z|^2 <= c.
/// Solutions found at one radius are kept and reused as starts and as
/// feasible candidates at other radii, which makes the endpoints monotone in c.
class ProjectionProblem {
 public:
  ProjectionProblem(const ReducedForm& rf, const RestrictionSet& rset, const ProjectionConfig& config = {})
      : rf_(rf), rset_(rset), config_(config) {
    require(rf.mu.size() == rf.d(), ErrorCode::DimensionMismatch, "projection: reduced form has no mu");
    require(rf.Omega.rows() == rf.d() && rf.Omega.cols() == rf.d(), ErrorCode::DimensionMismatch,
            "projection: reduced form has no Omega");
    require(rf.T > 0, ErrorCode::DomainError, "projection: sample size must be positive");
    require_sign_normalization(rset, rf.n);
    validate(rset, rf.n);
    Omega_ = regularize_covariance(rf.Omega).Omega;
    W_ = psd_factor(Omega_ / static_cast<double>(rf.T));
    d_ = rf.d();
    nn_ = static_cast<Eigen::Index>(rf.n) * rf.n;
    try {
      center_ = std::make_unique<IdentifiedSetProblem>(rf.A, rf.Sigma, rset, config.inner,
                                                       derive_seed(config.seed, {0xce47e7ULL}), config.inner.starts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularSigma) throw;
      center_error_ = e.what();
    }
  }

  const ReducedForm& reduced_form() const { return rf_; }
  const Matrix& omega() const { return Omega_; }

  /// Plug-in identified set at mu_hat, or nullopt when it is empty.
  std::optional<IdentifiedSetBounds> plugin(const Target& target) {
    std::lock_guard<std::mutex> lock(plugin_mutex_);
    auto key = std::make_tuple(target.k, target.i, target.j, target.cumulative);
    auto it = plugin_.find(key);
    if (it != plugin_.end()) return it->second;
    std::optional<IdentifiedSetBounds> out;
    if (center_) {
      try {
        out = center_->bounds(target);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyIdentifiedSet) throw;
      }
    }
    plugin_.emplace(key, out);
    return out;
  }

  EndpointResult endpoint(const Target& target, Direction dir, double c) {
    require(c >= 0.0 && std::isfinite(c), ErrorCode::DomainError, "project_endpoint: c must be finite and >= 0");
    auto center = plugin(target);
    const bool maximize = dir == Direction::Maximize;
    if (c == 0.0) {
      EndpointResult r;
      r.mu = rf_.mu;
      r.wald = 0.0;
      if (!center) {
        r.status = EndpointStatus::Failed;
        r.message = "identified set is empty at the estimate";
        return r;
      }
      r.value = maximize ? center->upper : center->lower;
      r.B = maximize ? center->argmax_B : center->argmin_B;
      r.status = EndpointStatus::Ok;
      r.violation = 0.0;
      r.converged = true;
      r.start_index = 0;
      finish(r);
      return r;
    }

    const auto key = std::make_tuple(target.k, target.i, target.j, target.cumulative, maximize);
    std::vector<Vector> pool;
    {
      std::lock_guard<std::mutex> lock(pool_mutex_);
      pool = pool_[key];
    }

    auto better = [maximize](double a, double b) { return maximize ? a > b : a < b; };
    NlpProblem problem = make_problem(target, c);
    std::optional<std::pair<double, Vector>> best;  // best feasible candidate
    auto offer = [&](const Vector& x) {
      NlpEvaluation e = problem.evaluate(x);
      if (!std::isfinite(e.objective) || constraint_violation(e) > config_.solver.feas_tol) return;
      if (!best || better(e.objective, best->first)) best = std::make_pair(e.objective, x);
    };

    // start 0: plug-in solution lifted to z = 0
    if (center) {
      Vector x0 = Vector::Zero(d_ + nn_);
      const Matrix& B = maximize ? center->argmax_B : center->argmin_B;
      x0.tail(nn_) = Eigen::Map<const Vector>(B.data(), nn_);
      problem.starts.push_back(x0);
      offer(x0);
    }
    for (const auto& x : pool) offer(x);
    // best stored solution pulled into this ellipsoid
    if (!pool.empty()) {
      const Vector* top = nullptr;
      double top_value = 0.0;
      for (const auto& x : pool) {
        NlpEvaluation e = problem.evaluate(x);
        if (!std::isfinite(e.objective)) continue;
        if (!top || better(e.objective, top_value)) {
          top = &x;
          top_value = e.objective;
        }
      }
      if (top) {
        if (auto s = shrink_into(*top, c)) problem.starts.push_back(*s);
      }
    }
    const int jitter = std::max(0, config_.starts - (center ? 1 : 0));
    for (int s = 0; s < jitter; ++s) {
      Rng rng = make_rng(config_.seed, {0x9107ULL, static_cast<std::uint64_t>(target.k),
                                        static_cast<std::uint64_t>(target.i), static_cast<std::uint64_t>(target.j),
                                        target.cumulative ? 1ULL : 0ULL, maximize ? 1ULL : 0ULL,
                                        static_cast<std::uint64_t>(s)});
      if (auto x = jitter_start(rng, c)) problem.starts.push_back(*x);
    }

    EndpointResult r;
    r.starts_used = static_cast<int>(problem.starts.size());
    bool solver_failed = false;
    if (!problem.starts.empty()) {
      try {
        SolverConfig sc = config_.solver;
        // the objective grows like a high power of A outside the ellipsoid,
        // so unbounded first steps can escape for good
        if (sc.max_step == 0.0) sc.max_step = std::max(1.0, std::sqrt(c));
        NlpSolution sol = solve(problem, dir, sc);
        r.converged = sol.converged;
        r.start_index = sol.start_index;
        r.used_fallback = sol.diagnostics[static_cast<std::size_t>(sol.start_index)].used_fallback;
        if (!best || better(sol.value, best->first)) {
          best = std::make_pair(sol.value, sol.x);
        } else {
          r.start_index = -1;  // a stored candidate beat the solver
        }
        std::lock_guard<std::mutex> lock(pool_mutex_);
        pool_[key].push_back(sol.x);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoFeasibleStart) throw;
        r.message = e.what();
        solver_failed = true;
      }
    }
    if (!best) {
      r.status = EndpointStatus::Failed;
      if (r.message.empty()) r.message = "no feasible start inside the ellipsoid";
      return r;
    }
    r.value = best->first;
    r.mu = rf_.mu + W_ * best->second.head(d_);
    r.B = Eigen::Map<const Matrix>(best->second.tail(nn_).data(), rf_.n, rf_.n);
    r.violation = constraint_violation(problem.evaluate(best->second));
    r.status = center ? EndpointStatus::Ok : EndpointStatus::EmptyAtCenter;
    if (!center) r.message = "identified set is empty at the estimate";
    // a stored candidate only bounds the endpoint from inside
    if (solver_failed) r.status = EndpointStatus::Failed;
    finish(r);
    return r;
  }

  ProjectionInterval interval(const Target& target, double c) {
    ProjectionInterval out;
    out.target = target;
    if (auto center = plugin(target)) {
      out.plugin_lower = center->lower;
      out.plugin_upper = center->upper;
    }
    out.upper_detail = endpoint(target, Direction::Maximize, c);
    out.lower_detail = endpoint(target, Direction::Minimize, c);
    out.upper = out.upper_detail.value;
    out.lower = out.lower_detail.value;
    if (out.upper_detail.status == EndpointStatus::Failed || out.lower_detail.status == EndpointStatus::Failed)
      out.status = EndpointStatus::Failed;
    else
      out.status = out.upper_detail.status;
    return out;
  }

  ProjectionRegion region(const std::vector<Target>& targets, double c) {
    for (const auto& t : targets) plugin(t);
    ProjectionRegion reg;
    reg.c = c;
    reg.intervals.resize(targets.size());
    std::vector<EndpointResult> ends(2 * targets.size());
    parallel_for(ends.size(), config_.threads, [&](std::size_t e) {
      ends[e] = endpoint(targets[e / 2], e % 2 ? Direction::Minimize : Direction::Maximize, c);
    });
    for (std::size_t h = 0; h < targets.size(); ++h) {
      auto& iv = reg.intervals[h];
      iv.target = targets[h];
      if (auto center = plugin(targets[h])) {
        iv.plugin_lower = center->lower;
        iv.plugin_upper = center->upper;
      }
      iv.upper_detail = std::move(ends[2 * h]);
      iv.lower_detail = std::move(ends[2 * h + 1]);
      iv.upper = iv.upper_detail.value;
      iv.lower = iv.lower_detail.value;
      const bool failed =
          iv.upper_detail.status == EndpointStatus::Failed || iv.lower_detail.status == EndpointStatus::Failed;
      iv.status = failed ? EndpointStatus::Failed : iv.upper_detail.status;
    }
    return reg;
  }

 private:
  struct Parts {
    Matrix A;
    Matrix Sigma;
  };

  Parts parts(const Vector& z) const {
    Vector mu = rf_.mu + W_ * z;
    auto u = unpack_mu(mu, rf_.n, rf_.p);
    return {std::move(u.A), std::move(u.Sigma)};
  }

  NlpProblem make_problem(const Target& target, double c) const {
    const Eigen::Index n = rf_.n;
    const bool strict = config_.strict_stability;
    Eigen::Index n_eq = 0, n_ineq = 0;
    for (const auto& it : rset_.items) (it.sense == Sense::Eq ? n_eq : n_ineq)++;
    NlpProblem p;
    p.dimension = d_ + nn_;
    p.evaluate = [this, target, c, n, n_eq, n_ineq, strict](const Vector& x) {
      NlpEvaluation e;
      e.equalities = Vector::Constant(vech_size(n) + n_eq, std::numeric_limits<double>::quiet_NaN());
      e.inequalities = Vector::Constant(1 + n_ineq + (strict ? 1 : 0), std::numeric_limits<double>::quiet_NaN());
      e.objective = std::numeric_limits<double>::quiet_NaN();
      const Vector z = x.head(d_);
      Eigen::Map<const Matrix> B(x.tail(nn_).data(), n, n);
      Parts pr = parts(z);
      e.inequalities(0) = c - z.squaredNorm();
      e.equalities.head(vech_size(n)) = vech(B * B.transpose() - pr.Sigma);
      try {
        auto rows = constraint_rows(pr.A, pr.Sigma, rset_);
        Eigen::Index ie = vech_size(n), ii = 1;
        for (const auto& row : rows) {
          if (row.sense == Sense::Eq)
            e.equalities(ie++) = row.slack(B);
          else
            e.inequalities(ii++) = row.slack(B);
        }
        e.objective = response_matrix(pr.A, target.k, target.cumulative).row(target.i).dot(B.col(target.j));
        if (strict) e.inequalities(ii) = (1.0 - 1e-6) - stability_margin(pr.A);
      } catch (const Error&) {
        // no long-run matrix here; leave NaN so the line search backs off
      }
      return e;
    };
    return p;
  }

  // Column-sign-adjusted random start with z uniform in the ball of radius sqrt(c).
  std::optional<Vector> jitter_start(Rng& rng, double c) const {
    Vector z = uniform_in_ball(rng, d_, c);
    for (int attempt = 0; attempt < 20; ++attempt) {
      Parts pr = parts(z);
      Eigen::LLT<Matrix> llt(pr.Sigma);
      if (llt.info() == Eigen::Success && is_positive_definite(pr.Sigma)) {
        Matrix L = llt.matrixL();
        Matrix Q = haar_orthogonal(rng, rf_.n);
        try {
          sign_adjust(Q, L, constraint_rows(pr.A, pr.Sigma, rset_));
        } catch (const Error&) {
        }
        Matrix B = L * Q;
        Vector x(d_ + nn_);
        x.head(d_) = z;
        x.tail(nn_) = Eigen::Map<const Vector>(B.data(), nn_);
        return x;
      }
      z *= 0.5;
    }
    return std::nullopt;
  }

  // Rescales z into the ball and re-fits B to the new Sigma keeping its rotation.
  std::optional<Vector> shrink_into(const Vector& x, double c) const {
    Vector z = x.head(d_);
    const double norm2 = z.squaredNorm();
    if (norm2 <= c) return x;
    Parts old = parts(z);
    z *= std::sqrt(c / norm2);
    Parts now = parts(z);
    Eigen::LLT<Matrix> lo(old.Sigma), ln(now.Sigma);
    if (lo.info() != Eigen::Success || ln.info() != Eigen::Success) return std::nullopt;
    Eigen::Map<const Matrix> B(x.tail(nn_).data(), rf_.n, rf_.n);
    Matrix Q = lo.matrixL().solve(Matrix(B));
    Matrix Bn = Matrix(ln.matrixL()) * Q;
    Vector out(d_ + nn_);
    out.head(d_) = z;
    out.tail(nn_) = Eigen::Map<const Vector>(Bn.data(), nn_);
    return out;
  }

  void finish(EndpointResult& r) const {
    WaldEllipsoid w{rf_.mu, Omega_, static_cast<double>(rf_.T), 0.0};
    r.wald = w.form(r.mu);
    r.stability_margin = stability_margin(unpack_mu(r.mu, rf_.n, rf_.p).A);
  }

  ReducedForm rf_;
  RestrictionSet rset_;
  ProjectionConfig config_;
  Matrix Omega_;
  Matrix W_;
  Eigen::Index d_ = 0;
  Eigen::Index nn_ = 0;
  std::unique_ptr<IdentifiedSetProblem> center_;
  std::string center_error_;
  std::mutex plugin_mutex_;
  std::map<std::tuple<int, int, int, bool>, std::optional<IdentifiedSetBounds>> plugin_;
  std::mutex pool_mutex_;
  std::map<std::tuple<int, int, int, bool, bool>, std::vector<Vector>> pool_;
};

inline EndpointResult project_endpoint(const ReducedForm& rf, const RestrictionSet& rset, const Target& target,
                                       double c, Direction dir, const ProjectionConfig& config = {}) {
  ProjectionProblem problem(rf, rset, config);
  return problem.endpoint(target, dir, c);
}

inline ProjectionRegion projection_region(const ReducedForm& rf, const RestrictionSet& rset,
                                          const std::vector<Target>& targets, double c,
                                          const ProjectionConfig& config = {}) {
  ProjectionProblem problem(rf, rset, config);
  return problem.region(targets, c);
}

/// True iff every value lies in the matching region interval.
inline bool contains(const ProjectionRegion& region, const Vector& lambda, double tol = 1e-10) {
  require(lambda.size() == static_cast<Eigen::Index>(region.size()), ErrorCode::DimensionMismatch,
          "contains: one value per target expected");
  for (std::size_t h = 0; h < region.size(); ++h) {
    const auto& iv = region.intervals[h];
    const double v = lambda(static_cast<Eigen::Index>(h));
    if (!(v >= iv.lower - tol && v <= iv.upper + tol)) return false;
  }
  return true;
}

/// True iff every identified set [lower_h, upper_h] lies inside interval h.
inline bool contains(const ProjectionRegion& region, const Vector& lower, const Vector& upper, double tol = 1e-10) {
  require(lower.size() == static_cast<Eigen::Index>(region.size()) && upper.size() == lower.size(),
          ErrorCode::DimensionMismatch, "contains: one identified set per target expected");
  for (std::size_t h = 0; h < region.size(); ++h) {
    const auto& iv = region.intervals[h];
    const auto e = static_cast<Eigen::Index>(h);
    if (!(lower(e) >= iv.lower - tol && upper(e) <= iv.upper + tol)) return false;
  }
  return true;
}

}  // namespace svarproj
