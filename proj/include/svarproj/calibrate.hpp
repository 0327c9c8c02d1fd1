#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "svarproj/chi2.hpp"
#include "svarproj/common.hpp"
#include "svarproj/idset.hpp"
#include "svarproj/parallel.hpp"
#include "svarproj/posterior.hpp"
#include "svarproj/projection.hpp"
#include "svarproj/random.hpp"
#include "svarproj/restrictions.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

struct Credibility {
  double value = 0.0;
  std::size_t inside = 0;
  std::size_t counted = 0;
  std::size_t excluded = 0;  // singular rows, plus empty rows unless strict
};

/// Share of posterior identified sets lying entirely inside the region.
/// Singular rows are always excluded; empty rows are excluded by default and
/// count as misses in strict mode. `tol` absorbs solver noise between the
/// region endpoints and the per-draw bounds.
inline Credibility robust_credibility(const BatchBounds& batch, const ProjectionRegion& region, bool strict = false,
                                      double tol = 1e-7) {
  require(batch.targets.size() == region.size(), ErrorCode::DimensionMismatch,
          "robust_credibility: region and bounds have different targets");
  for (std::size_t h = 0; h < region.size(); ++h)
    require(batch.targets[h] == region.intervals[h].target, ErrorCode::DimensionMismatch,
            "robust_credibility: target order differs");
  Credibility out;
  for (std::size_t m = 0; m < batch.rows(); ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    if (batch.status[m] == BoundStatus::Singular || (batch.status[m] == BoundStatus::Empty && !strict)) {
      ++out.excluded;
      continue;
    }
    ++out.counted;
    if (batch.status[m] != BoundStatus::Ok) continue;
    if (contains(region, batch.lower.row(row).transpose(), batch.upper.row(row).transpose(), tol)) ++out.inside;
  }
  require(out.counted > 0, ErrorCode::NoValidDraws, "robust_credibility: every draw is excluded");
  out.value = static_cast<double>(out.inside) / static_cast<double>(out.counted);
  return out;
}

struct CalibrationStep {
  double c = 0.0;
  double credibility = 0.0;
};

struct CalibrationConfig {
  ProjectionConfig projection;
  bool strict_empty = false;
  int max_iter = 60;
  int expansions = 3;
};

struct CalibrationResult {
  double c_star = 0.0;
  double achieved = 0.0;
  double eta = 0.0;
  double level = 0.0;  // 1 - alpha
  double baseline_c = 0.0;
  double baseline_credibility = 0.0;
  double effective_dof = 0.0;
  bool converged = false;
  std::size_t excluded_draws = 0;
  std::size_t counted_draws = 0;
  std::vector<CalibrationStep> iterations;
  std::vector<std::string> warnings;
  ProjectionRegion region;    // at c_star
  ProjectionRegion baseline;  // at baseline_c
};

/// Bisection on the squared radius until the robust credibility of the
/// projection region is within eta of 1 - alpha. Bounds are computed once;
/// regions are cached per radius and share solutions across radii.
inline CalibrationResult calibrate_radius(ProjectionProblem& problem, const BatchBounds& batch, double alpha,
                                          double eta, const CalibrationConfig& config = {}) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::DomainError, "calibrate_radius: alpha must lie in (0, 1)");
  require(eta > 0.0, ErrorCode::DomainError, "calibrate_radius: eta must be positive");
  require(batch.rows() > 0, ErrorCode::NoValidDraws, "calibrate_radius: no draws");
  const double level = 1.0 - alpha;
  const auto& targets = batch.targets;
  std::map<double, ProjectionRegion> cache;
  CalibrationResult out;
  out.eta = eta;
  out.level = level;

  auto region_at = [&](double c) -> const ProjectionRegion& {
    auto it = cache.lower_bound(c - 1e-9);
    if (it != cache.end() && std::abs(it->first - c) <= 1e-9) return it->second;
    return cache.emplace(c, problem.region(targets, c)).first->second;
  };
  auto credibility = [&](double c) {
    Credibility cr = robust_credibility(batch, region_at(c), config.strict_empty);
    out.excluded_draws = cr.excluded;
    out.counted_draws = cr.counted;
    out.iterations.push_back({c, cr.value});
    return cr.value;
  };
  auto in_band = [&](double v) { return v >= level - eta && v <= level + eta; };

  const double d = static_cast<double>(problem.reduced_form().d());
  out.baseline_c = chi2_quantile(d, level);
  double lo = 0.0, hi = out.baseline_c;
  double c_star = std::numeric_limits<double>::quiet_NaN();

  double cred_hi = credibility(hi);
  out.baseline_credibility = cred_hi;
  for (int e = 0; e < config.expansions && cred_hi < level - eta; ++e) {
    lo = hi;
    hi *= 2.0;
    cred_hi = credibility(hi);
  }
  if (cred_hi < level - eta)
    throw Error(ErrorCode::BracketFailure, "calibrate_radius: credibility " + std::to_string(cred_hi) +
                                               " at c = " + std::to_string(hi) + " stays below the target");
  if (in_band(cred_hi)) {
    c_star = hi;
    out.converged = true;
  } else if (lo == 0.0 && credibility(0.0) >= level - eta) {
    // the plug-in region already reaches the target
    c_star = 0.0;
    out.converged = in_band(out.iterations.back().credibility);
    if (!out.converged) out.warnings.push_back("credibility exceeds the target at c = 0; returning c = 0");
  } else {
    for (int it = 0; it < config.max_iter; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = credibility(mid);
      if (in_band(v)) {
        c_star = mid;
        out.converged = true;
        break;
      }
      (v < level - eta ? lo : hi) = mid;
      if (hi - lo <= 1e-10 * std::max(1.0, hi)) break;
    }
    if (!out.converged) {
      c_star = hi;
      out.warnings.push_back("bisection stopped without reaching the credibility band; returning upper bracket");
    }
  }

  // Rebuild the final regions from every stored solution so that they
  // nest all intermediate ones.
  cache.clear();
  out.region = problem.region(targets, c_star);
  out.baseline = problem.region(targets, out.baseline_c);
  Credibility fin = robust_credibility(batch, out.region, config.strict_empty);
  out.achieved = fin.value;
  out.excluded_draws = fin.excluded;
  out.counted_draws = fin.counted;
  out.c_star = c_star;
  out.effective_dof = effective_dof(c_star, level);
  if (out.converged && !in_band(out.achieved))
    out.warnings.push_back("credibility moved to " + std::to_string(out.achieved) + " after the final re-solve");

  auto trace = out.iterations;
  std::sort(trace.begin(), trace.end(), [](const auto& a, const auto& b) { return a.c < b.c; });
  const double noise = 2.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, out.counted_draws)));
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].credibility < trace[i - 1].credibility - noise) {
      out.warnings.push_back("NonMonotoneDetected: credibility drops between c = " + std::to_string(trace[i - 1].c) +
                             " and c = " + std::to_string(trace[i].c));
      break;
    }
  }
  return out;
}

/// Convenience form: bounds of every draw, then calibration.
inline CalibrationResult calibrate_radius(const ReducedForm& rf, const RestrictionSet& rset,
                                          const std::vector<Target>& targets, const PosteriorDraws& draws,
                                          double alpha, double eta = 0.005, const CalibrationConfig& config = {}) {
  require(draws.size() > 0, ErrorCode::NoValidDraws, "calibrate_radius: no draws");
  BatchBounds batch = bounds_batch(draws.draws, VarSpec{rf.n, rf.p}, rset, targets, config.projection.inner);
  for (std::size_t m = 0; m < draws.status.size(); ++m)
    if (draws.status[m] == DrawStatus::Singular) batch.status[m] = BoundStatus::Singular;
  ProjectionProblem problem(rf, rset, config.projection);
  return calibrate_radius(problem, batch, alpha, eta, config);
}

struct Interval {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();

  double length() const { return upper - lower; }
};

/// Shortest interval holding ceil((1 - alpha) M) whole identified sets of
/// target column h. Sweeps candidate lower ends from the right while a
/// max-heap keeps the smallest upper ends seen so far.
inline Interval gk_robust_region(const BatchBounds& batch, std::size_t h, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::DomainError, "gk_robust_region: alpha must lie in (0, 1)");
  require(h < batch.targets.size(), ErrorCode::DimensionMismatch, "gk_robust_region: target index");
  std::vector<std::pair<double, double>> sets;
  for (std::size_t m = 0; m < batch.rows(); ++m)
    if (batch.status[m] == BoundStatus::Ok)
      sets.emplace_back(batch.lower(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(h)),
                        batch.upper(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(h)));
  require(!sets.empty(), ErrorCode::NoValidDraws, "gk_robust_region: no valid draws");
  const auto K = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(sets.size()) - 1e-12));
  const std::size_t need = std::clamp<std::size_t>(K, 1, sets.size());
  std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::priority_queue<double> uppers;
  Interval best;
  for (const auto& [l, u] : sets) {
    uppers.push(u);
    if (uppers.size() > need) uppers.pop();
    if (uppers.size() == need) {
      const double top = std::max(uppers.top(), l);
      if (std::isnan(best.lower) || top - l <= best.length()) best = Interval{l, top};
    }
  }
  return best;
}

struct DmSigma {
  double sigma_lower = 0.0;
  double sigma_upper = 0.0;
  Vector grad_lower;
  Vector grad_upper;
  IdentifiedSetBounds center;
  bool nondifferentiable_suspect = false;
  std::vector<std::string> warnings;
};

struct DmConfig {
  IdsetConfig inner = [] {
    IdsetConfig c;
    c.starts = 3;
    c.solver.feas_tol = 1e-12;
    c.solver.opt_tol = 1e-11;
    return c;
  }();
  double step = 1e-5;            // relative to 1 + |mu_i|
  double one_sided_tol = 0.10;   // forward/backward disagreement flag
};

/// Central-difference gradients of both identified-set endpoints in mu and
/// the implied standard errors sqrt(g' Omega g).
inline DmSigma dm_sigma(const Vector& mu, const VarSpec& spec, const RestrictionSet& rset, const Target& target,
                        const Matrix& omega, const DmConfig& config = {}) {
  const Eigen::Index d = mu_size(spec.n, spec.p);
  require(mu.size() == d && omega.rows() == d && omega.cols() == d, ErrorCode::DimensionMismatch,
          "dm_sigma: dimensions");
  require_sign_normalization(rset, spec.n);
  auto u0 = unpack_mu(mu, spec.n, spec.p);
  IdentifiedSetProblem base(u0.A, detail::checked_sigma(u0.Sigma), rset, config.inner,
                            derive_seed(config.inner.seed, {0xd3ULL}), config.inner.starts);
  DmSigma out;
  out.center = base.bounds(target);
  const Matrix L0 = base.cholesky();

  // endpoints at a shifted mu, warm-started from the centre solutions carried
  // over to the new covariance factor
  auto at = [&](const Vector& m) {
    auto u = unpack_mu(m, spec.n, spec.p);
    IdentifiedSetProblem prob(u.A, detail::checked_sigma(u.Sigma), rset, config.inner,
                              derive_seed(config.inner.seed, {0xd3ULL}), config.inner.starts);
    const Matrix& L = prob.cholesky();
    std::vector<Matrix> warm{L * L0.triangularView<Eigen::Lower>().solve(out.center.argmax_B),
                             L * L0.triangularView<Eigen::Lower>().solve(out.center.argmin_B)};
    auto b = prob.bounds(target, warm);
    return std::pair{b.lower, b.upper};
  };

  out.grad_lower.resize(d);
  out.grad_upper.resize(d);
  Vector fwd_lo(d), fwd_up(d), bwd_lo(d), bwd_up(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = config.step * (1.0 + std::abs(mu(i)));
    Vector mp = mu, mm = mu;
    mp(i) += h;
    mm(i) -= h;
    auto [lp, up] = at(mp);
    auto [lm, um] = at(mm);
    out.grad_lower(i) = (lp - lm) / (2.0 * h);
    out.grad_upper(i) = (up - um) / (2.0 * h);
    fwd_lo(i) = (lp - out.center.lower) / h;
    fwd_up(i) = (up - out.center.upper) / h;
    bwd_lo(i) = (out.center.lower - lm) / h;
    bwd_up(i) = (out.center.upper - um) / h;
  }
  auto disagree = [&](const Vector& f, const Vector& b) {
    const double scale = std::max({f.norm(), b.norm(), 1e-8});
    return (f - b).norm() > config.one_sided_tol * scale;
  };
  if (disagree(fwd_lo, bwd_lo) || disagree(fwd_up, bwd_up)) {
    out.nondifferentiable_suspect = true;
    out.warnings.push_back("NonDifferentiableSuspect: one-sided differences disagree by more than " +
                           std::to_string(config.one_sided_tol * 100.0) + "%");
  }
  const Matrix S = symmetrize(omega);
  out.sigma_lower = std::sqrt(std::max(0.0, out.grad_lower.dot(S * out.grad_lower)));
  out.sigma_upper = std::sqrt(std::max(0.0, out.grad_upper.dot(S * out.grad_upper)));
  return out;
}

struct DmInterval {
  Target target;
  double r = 0.0;
  double delta = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double sigma_lower = 0.0;
  double sigma_upper = 0.0;
  double plugin_lower = 0.0;
  double plugin_upper = 0.0;
  std::vector<std::string> warnings;
};

/// [v_lo - (r + delta) sigma_lo / sqrt(T), v_up + (r + delta) sigma_up / sqrt(T)]
inline DmInterval dm_interval(const ReducedForm& rf, const RestrictionSet& rset, const Target& target, double r,
                              double delta, const DmConfig& config = {}) {
  require(r >= 0.0, ErrorCode::DomainError, "dm_interval: r must be non-negative");
  DmSigma s = dm_sigma(rf.mu, VarSpec{rf.n, rf.p}, rset, target, rf.Omega, config);
  DmInterval out;
  out.target = target;
  out.r = r;
  out.delta = delta;
  out.sigma_lower = s.sigma_lower;
  out.sigma_upper = s.sigma_upper;
  out.plugin_lower = s.center.lower;
  out.plugin_upper = s.center.upper;
  const double scale = (r + delta) / std::sqrt(static_cast<double>(rf.T));
  out.lower = s.center.lower - scale * s.sigma_lower;
  out.upper = s.center.upper + scale * s.sigma_upper;
  out.warnings = std::move(s.warnings);
  return out;
}

struct CoverageResult {
  std::vector<double> radii;       // squared radii, ascending
  std::vector<double> coverage;    // per radius: min over the lambda grid
  std::vector<double> lambda_grid;
  Matrix hits;                     // radii x lambda grid: fraction of draws covering
  int draws = 0;
  int failed_draws = 0;
};

/// Monte Carlo coverage of the projection interval: estimates are drawn from
/// N(mu_i, Omega/T) with Omega held fixed; per radius the coverage is the
/// minimum over K equally spaced values of the identified set at mu_i.
/// Radii are solved in ascending order per draw, so coverage is monotone.
inline CoverageResult frequentist_coverage(const Vector& mu_i, const Matrix& omega, int T, const VarSpec& spec,
                                           const RestrictionSet& rset, const Target& target,
                                           std::vector<double> radii, int M, int K, std::uint64_t seed,
                                           const ProjectionConfig& config = {}) {
  require(M >= 1 && K >= 1 && !radii.empty(), ErrorCode::DomainError, "frequentist_coverage: M, K, radii");
  const Eigen::Index d = mu_size(spec.n, spec.p);
  require(mu_i.size() == d && omega.rows() == d, ErrorCode::DimensionMismatch, "frequentist_coverage: dimensions");
  std::sort(radii.begin(), radii.end());
  auto u = unpack_mu(mu_i, spec.n, spec.p);
  IdentifiedSetBounds truth = bounds(u.A, u.Sigma, rset, target, config.inner);

  CoverageResult out;
  out.radii = radii;
  out.draws = M;
  for (int k = 0; k < K; ++k)
    out.lambda_grid.push_back(K == 1 ? 0.5 * (truth.lower + truth.upper)
                                     : truth.lower + (truth.upper - truth.lower) * k / (K - 1.0));
  const Matrix F = psd_factor(symmetrize(omega) / static_cast<double>(T));
  const auto R = radii.size();
  std::vector<std::vector<Interval>> intervals(static_cast<std::size_t>(M), std::vector<Interval>(R));
  std::vector<char> failed(static_cast<std::size_t>(M), 0);

  ProjectionConfig inner_cfg = config;
  inner_cfg.threads = 1;
  parallel_for(static_cast<std::size_t>(M), config.threads, [&](std::size_t m) {
    Rng rng = make_rng(seed, {0xf7e9ULL, static_cast<std::uint64_t>(m)});
    ReducedForm rf;
    rf.n = spec.n;
    rf.p = spec.p;
    rf.T = T;
    rf.mu = mu_i + F * standard_normal_vector(rng, d);
    auto um = unpack_mu(rf.mu, spec.n, spec.p);
    rf.A = um.A;
    rf.Sigma = um.Sigma;
    rf.Omega = omega;
    ProjectionConfig cfg = inner_cfg;
    cfg.seed = derive_seed(seed, {0xf7eaULL, static_cast<std::uint64_t>(m)});
    try {
      ProjectionProblem problem(rf, rset, cfg);
      for (std::size_t r = 0; r < R; ++r) {
        auto iv = problem.interval(target, radii[r]);
        if (iv.status != EndpointStatus::Failed) intervals[m][r] = Interval{iv.lower, iv.upper};
      }
    } catch (const Error&) {
      failed[m] = 1;
    }
  });
  out.failed_draws = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  out.hits = Matrix::Zero(static_cast<Eigen::Index>(R), K);
  for (std::size_t r = 0; r < R; ++r) {
    for (int k = 0; k < K; ++k) {
      const double lam = out.lambda_grid[static_cast<std::size_t>(k)];
      int hit = 0;
      for (int m = 0; m < M; ++m) {
        const auto& iv = intervals[static_cast<std::size_t>(m)][r];
        if (lam >= iv.lower - 1e-10 && lam <= iv.upper + 1e-10) ++hit;
      }
      out.hits(static_cast<Eigen::Index>(r), k) = static_cast<double>(hit) / M;
    }
    out.coverage.push_back(out.hits.row(static_cast<Eigen::Index>(r)).minCoeff());
  }
  return out;
}

inline double frequentist_coverage(const Vector& mu_i, const Matrix& omega, int T, const VarSpec& spec,
                                   const RestrictionSet& rset, const Target& target, double c, int M, int K,
                                   std::uint64_t seed, const ProjectionConfig& config = {}) {
  return frequentist_coverage(mu_i, omega, T, spec, rset, target, std::vector<double>{c}, M, K, seed, config)
      .coverage[0];
}

struct FrequentistRow {
  double c = 0.0;
  double r = 0.0;
  double approx_cl = 0.0;
};

struct FrequentistCalibration {
  double c_star = 0.0;
  double r_star = 0.0;
  std::vector<FrequentistRow> table;
};

/// ApproxCL(c) is the smallest coverage over the grid of reduced forms; the
/// selected radius has ApproxCL closest to 1 - alpha (ties: smaller radius).
inline FrequentistCalibration calibrate_frequentist(const std::vector<Vector>& grid_mus, std::vector<double> radii,
                                                    const Matrix& omega, int T, const VarSpec& spec,
                                                    const RestrictionSet& rset, const Target& target, double alpha,
                                                    int M, int K, std::uint64_t seed,
                                                    const ProjectionConfig& config = {}) {
  require(!grid_mus.empty() && !radii.empty(), ErrorCode::DomainError, "calibrate_frequentist: empty grid");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::DomainError, "calibrate_frequentist: alpha must lie in (0, 1)");
  std::sort(radii.begin(), radii.end());
  std::vector<double> cl(radii.size(), 1.0);
  for (std::size_t g = 0; g < grid_mus.size(); ++g) {
    auto cov = frequentist_coverage(grid_mus[g], omega, T, spec, rset, target, radii, M, K,
                                    derive_seed(seed, {static_cast<std::uint64_t>(g)}), config);
    for (std::size_t r = 0; r < radii.size(); ++r) cl[r] = std::min(cl[r], cov.coverage[r]);
  }
  FrequentistCalibration out;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < radii.size(); ++r) {
    out.table.push_back({radii[r], std::sqrt(radii[r]), cl[r]});
    const double gap = std::abs(cl[r] - (1.0 - alpha));
    if (gap < best_gap) {
      best_gap = gap;
      out.c_star = radii[r];
      out.r_star = std::sqrt(radii[r]);
    }
  }
  return out;
}

}  // namespace svarproj
