#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/qp.hpp"

namespace svarproj {

/// Values of the objective, equality constraints h(x) = 0 and inequality
/// constraints g(x) >= 0 at one point.
struct NlpEvaluation {
  double objective = 0.0;
  Vector equalities;
  Vector inequalities;
};

struct NlpDerivatives {
  Vector gradient;
  Matrix equality_jacobian;    // rows = constraints
  Matrix inequality_jacobian;  // rows = constraints
};

struct NlpProblem {
  Eigen::Index dimension = 0;
  std::function<NlpEvaluation(const Vector&)> evaluate;
  /// Optional analytic derivatives; forward differences are used when empty.
  std::function<NlpDerivatives(const Vector&)> derivatives;
  std::vector<Vector> starts;
};

enum class Direction { Maximize, Minimize };

struct SolverConfig {
  double feas_tol = 1e-8;
  double opt_tol = 1e-6;
  int max_iter = 500;
  bool central_differences = false;
  /// Relative step for finite-difference derivatives; 0 picks a default
  /// (sqrt(eps) forward, cbrt(eps) central).
  double fd_step = 0.0;
  /// Infinity-norm cap on each SQP step; 0 leaves steps uncapped.
  double max_step = 0.0;
};

struct StartDiagnostic {
  double value = std::numeric_limits<double>::quiet_NaN();
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool used_fallback = false;
  int iterations = 0;
};

struct NlpSolution {
  Vector x;
  double value = std::numeric_limits<double>::quiet_NaN();
  double feasibility_violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  int start_index = -1;
  std::vector<StartDiagnostic> diagnostics;
};

inline double constraint_violation(const NlpEvaluation& e) {
  double v = 0.0;
  if (e.equalities.size() > 0) v = std::max(v, e.equalities.cwiseAbs().maxCoeff());
  if (e.inequalities.size() > 0) v = std::max(v, (-e.inequalities).cwiseMax(0.0).maxCoeff());
  return v;
}

/// Forward (or central) difference derivatives of every callback at once.
inline NlpDerivatives finite_difference_derivatives(const std::function<NlpEvaluation(const Vector&)>& evaluate,
                                                    const Vector& x, const NlpEvaluation& at_x, bool central,
                                                    double rel_step = 0.0) {
  const Eigen::Index m = x.size();
  NlpDerivatives d;
  d.gradient.resize(m);
  d.equality_jacobian.resize(at_x.equalities.size(), m);
  d.inequality_jacobian.resize(at_x.inequalities.size(), m);
  const double base = rel_step > 0.0 ? rel_step
                                     : (central ? std::cbrt(std::numeric_limits<double>::epsilon())
                                                : std::sqrt(std::numeric_limits<double>::epsilon()));
  Vector xp = x;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = base * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    const double hp = xp(i) - x(i);
    NlpEvaluation ep = evaluate(xp);
    if (central) {
      xp(i) = x(i) - h;
      const double hm = x(i) - xp(i);
      NlpEvaluation em = evaluate(xp);
      const double span = hp + hm;
      d.gradient(i) = (ep.objective - em.objective) / span;
      d.equality_jacobian.col(i) = (ep.equalities - em.equalities) / span;
      d.inequality_jacobian.col(i) = (ep.inequalities - em.inequalities) / span;
    } else {
      d.gradient(i) = (ep.objective - at_x.objective) / hp;
      d.equality_jacobian.col(i) = (ep.equalities - at_x.equalities) / hp;
      d.inequality_jacobian.col(i) = (ep.inequalities - at_x.inequalities) / hp;
    }
    xp(i) = x(i);
  }
  return d;
}

namespace detail {

// Internally everything is a minimization; `sign` flips the objective for
// maximization.
class SqpRun {
 public:
  SqpRun(const NlpProblem& problem, double sign, const SolverConfig& config)
      : problem_(problem), sign_(sign), config_(config) {}

  struct Point {
    Vector x;
    NlpEvaluation eval;  // objective already sign-adjusted
  };

  struct Outcome {
    Point point;
    bool converged = false;
    bool qp_failed = false;
    int iterations = 0;
  };

  Point make_point(const Vector& x) const {
    NlpEvaluation e = problem_.evaluate(x);
    e.objective *= sign_;
    return {x, std::move(e)};
  }

  NlpDerivatives derivatives(const Point& p) const {
    NlpDerivatives d;
    if (problem_.derivatives) {
      d = problem_.derivatives(p.x);
    } else {
      NlpEvaluation raw = p.eval;
      raw.objective *= sign_;
      d = finite_difference_derivatives(problem_.evaluate, p.x, raw, config_.central_differences, config_.fd_step);
    }
    d.gradient *= sign_;
    return d;
  }

  Vector lagrangian_gradient(const NlpDerivatives& d, const Vector& lam, const Vector& mu) const {
    Vector g = d.gradient;
    if (lam.size() > 0) g.noalias() -= d.equality_jacobian.transpose() * lam;
    if (mu.size() > 0) g.noalias() -= d.inequality_jacobian.transpose() * mu;
    return g;
  }

  static double l1_violation(const NlpEvaluation& e) {
    double v = e.equalities.cwiseAbs().sum();
    if (e.inequalities.size() > 0) v += (-e.inequalities).cwiseMax(0.0).sum();
    return v;
  }

  Outcome sqp(const Vector& x0, int max_iter) const {
    const Eigen::Index m = problem_.dimension;
    Outcome out;
    Point cur = make_point(x0);
    NlpDerivatives dcur = derivatives(cur);
    Matrix H = Matrix::Identity(m, m);
    bool scaled = false;
    double rho = 1.0;
    // best feasible iterate, so a run never ends worse than a feasible start
    std::optional<Point> incumbent;
    auto keep = [&](const Point& pt) {
      if (!std::isfinite(pt.eval.objective) || constraint_violation(pt.eval) > config_.feas_tol) return;
      if (!incumbent || pt.eval.objective < incumbent->eval.objective) incumbent = pt;
    };
    keep(cur);
    // trial points above this violation are rejected outright (filter-style cap)
    const double theta_max = 10.0 * std::max(1.0, l1_violation(cur.eval));

    for (int it = 0; it < max_iter; ++it) {
      out.iterations = it + 1;
      if (!cur.eval.equalities.allFinite() || !cur.eval.inequalities.allFinite() || !std::isfinite(cur.eval.objective))
        break;
      QpResult qp = solve_qp(H, dcur.gradient, dcur.equality_jacobian, cur.eval.equalities, dcur.inequality_jacobian,
                             cur.eval.inequalities);
      if (!qp.feasible || !qp.x.allFinite()) {
        out.qp_failed = true;
        break;
      }
      Vector p = qp.x;
      const Vector& lam = qp.eq_multipliers;
      const Vector& mu = qp.ineq_multipliers;

      const double viol = constraint_violation(cur.eval);
      Vector gl = lagrangian_gradient(dcur, lam, mu);
      double compl_gap = 0.0;
      for (Eigen::Index i = 0; i < mu.size(); ++i)
        compl_gap = std::max(compl_gap, std::abs(mu(i) * cur.eval.inequalities(i)));
      const double gscale = std::max(1.0, dcur.gradient.cwiseAbs().maxCoeff());
      if (viol <= config_.feas_tol &&
          ((gl.cwiseAbs().maxCoeff() <= config_.opt_tol * gscale && compl_gap <= config_.opt_tol * gscale) ||
           p.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + cur.x.cwiseAbs().maxCoeff()))) {
        out.converged = true;
        break;
      }

      if (config_.max_step > 0.0) {
        const double len = p.cwiseAbs().maxCoeff();
        if (len > config_.max_step) p *= config_.max_step / len;
      }

      double mult = 0.0;
      if (lam.size() > 0) mult = std::max(mult, lam.cwiseAbs().maxCoeff());
      if (mu.size() > 0) mult = std::max(mult, mu.maxCoeff());
      if (rho < 1.1 * mult) rho = std::max(1.5 * mult, 2.0 * rho);

      auto merit = [&](const Point& pt) { return pt.eval.objective + rho * l1_violation(pt.eval); };
      const double phi0 = merit(cur);
      const double deriv = dcur.gradient.dot(p) - rho * l1_violation(cur.eval);

      double alpha = 1.0;
      bool accepted = false;
      Point trial;
      for (int ls = 0; ls < 40; ++ls) {
        trial = make_point(cur.x + alpha * p);
        if (std::isfinite(merit(trial)) && l1_violation(trial.eval) <= theta_max &&
            merit(trial) <= phi0 + 1e-4 * alpha * std::min(deriv, 0.0)) {
          accepted = true;
          break;
        }
        if (ls == 0) {
          // second-order correction against the Maratos effect
          Vector ce = trial.eval.equalities - dcur.equality_jacobian * p;
          Vector ci = trial.eval.inequalities - dcur.inequality_jacobian * p;
          QpResult soc = solve_qp(H, dcur.gradient, dcur.equality_jacobian, ce, dcur.inequality_jacobian, ci);
          if (soc.feasible && soc.x.allFinite()) {
            Point corrected = make_point(cur.x + soc.x);
            if (std::isfinite(merit(corrected)) && l1_violation(corrected.eval) <= theta_max &&
                merit(corrected) <= phi0 + 1e-4 * std::min(deriv, 0.0)) {
              trial = std::move(corrected);
              accepted = true;
              break;
            }
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (!scaled && H.isIdentity()) break;
        // stale curvature: restart the quasi-Newton model
        H.setIdentity();
        scaled = false;
        continue;
      }

      NlpDerivatives dnew = derivatives(trial);
      Vector s = trial.x - cur.x;
      Vector y = lagrangian_gradient(dnew, lam, mu) - lagrangian_gradient(dcur, lam, mu);
      const double sy = s.dot(y);
      if (!scaled && sy > 0.0 && s.squaredNorm() > 0.0) {
        H = Matrix::Identity(m, m) * std::clamp(y.squaredNorm() / sy, 1e-6, 1e6);
        scaled = true;
      }
      Vector Hs = H * s;
      const double sHs = s.dot(Hs);
      if (sHs > 1e-300) {
        // Powell damping keeps H positive definite
        double theta = 1.0;
        if (sy < 0.2 * sHs) theta = 0.8 * sHs / (sHs - sy);
        Vector r = theta * y + (1.0 - theta) * Hs;
        const double sr = s.dot(r);
        if (sr > 1e-300) {
          H.noalias() += r * r.transpose() / sr;
          H.noalias() -= Hs * Hs.transpose() / sHs;
          H = 0.5 * (H + H.transpose());
        }
      }
      cur = std::move(trial);
      dcur = std::move(dnew);
      keep(cur);
    }
    const bool cur_feasible = std::isfinite(cur.eval.objective) && constraint_violation(cur.eval) <= config_.feas_tol;
    if (incumbent && (!cur_feasible || (!out.converged && incumbent->eval.objective < cur.eval.objective))) {
      out.point = std::move(*incumbent);
      out.converged = false;
    } else {
      out.point = std::move(cur);
    }
    return out;
  }

  // Augmented Lagrangian with an inner BFGS; used when the QP linearization
  // is inconsistent, to reach the feasible region.
  Point augmented_lagrangian(const Vector& x0, int max_outer) const {
    const Eigen::Index m = problem_.dimension;
    Point cur = make_point(x0);
    Vector lam = Vector::Zero(cur.eval.equalities.size());
    Vector mu = Vector::Zero(cur.eval.inequalities.size());
    double rho = 10.0;
    double prev_viol = constraint_violation(cur.eval);
    const double theta_max = 10.0 * std::max(1.0, l1_violation(cur.eval));

    auto al_value = [&](const Point& pt) {
      const auto& h = pt.eval.equalities;
      const auto& c = pt.eval.inequalities;
      double v = pt.eval.objective - lam.dot(h) + 0.5 * rho * h.squaredNorm();
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        double t = std::max(0.0, mu(i) - rho * c(i));
        v += (t * t - mu(i) * mu(i)) / (2.0 * rho);
      }
      return v;
    };
    auto al_gradient = [&](const Point& pt) {
      NlpDerivatives d = derivatives(pt);
      const auto& h = pt.eval.equalities;
      const auto& c = pt.eval.inequalities;
      Vector g = d.gradient;
      if (h.size() > 0) g.noalias() += d.equality_jacobian.transpose() * (rho * h - lam);
      if (c.size() > 0) {
        Vector w(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) w(i) = -std::max(0.0, mu(i) - rho * c(i));
        g.noalias() += d.inequality_jacobian.transpose() * w;
      }
      return g;
    };

    for (int outer = 0; outer < max_outer; ++outer) {
      Matrix Hinv = Matrix::Identity(m, m);
      Vector g = al_gradient(cur);
      double f = al_value(cur);
      for (int inner = 0; inner < 200; ++inner) {
        if (g.cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + std::abs(f))) break;
        Vector dir = -Hinv * g;
        double slope = g.dot(dir);
        if (slope >= 0.0) {
          Hinv.setIdentity();
          dir = -g;
          slope = -g.squaredNorm();
        }
        double alpha = 1.0;
        Point trial;
        bool ok = false;
        for (int ls = 0; ls < 50; ++ls) {
          trial = make_point(cur.x + alpha * dir);
          double ft = al_value(trial);
          if (std::isfinite(ft) && l1_violation(trial.eval) <= theta_max && ft <= f + 1e-4 * alpha * slope) {
            ok = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!ok) break;
        Vector gn = al_gradient(trial);
        Vector s = trial.x - cur.x;
        Vector y = gn - g;
        double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
          const double r = 1.0 / sy;
          Matrix I = Matrix::Identity(m, m);
          Hinv = (I - r * s * y.transpose()) * Hinv * (I - r * y * s.transpose()) + r * s * s.transpose();
        }
        cur = std::move(trial);
        g = std::move(gn);
        f = al_value(cur);
      }
      const auto& h = cur.eval.equalities;
      const auto& c = cur.eval.inequalities;
      lam -= rho * h;
      for (Eigen::Index i = 0; i < c.size(); ++i) mu(i) = std::max(0.0, mu(i) - rho * c(i));
      double viol = constraint_violation(cur.eval);
      if (viol <= config_.feas_tol) break;
      if (viol > 0.25 * prev_viol) rho = std::min(rho * 10.0, 1e10);
      prev_viol = viol;
    }
    return cur;
  }

  StartDiagnostic run(const Vector& start, Vector& x_out) const {
    StartDiagnostic diag;
    Outcome o = sqp(start, config_.max_iter);
    diag.iterations = o.iterations;
    if (o.qp_failed || constraint_violation(o.point.eval) > config_.feas_tol) {
      diag.used_fallback = true;
      Point al = augmented_lagrangian(o.point.x, 30);
      Outcome polished = sqp(al.x, config_.max_iter);
      diag.iterations += polished.iterations;
      Outcome next;
      if (constraint_violation(polished.point.eval) <= constraint_violation(al.eval) || polished.converged) {
        next = std::move(polished);
      } else {
        next.point = std::move(al);
      }
      const auto feasible = [&](const Point& pt) {
        return std::isfinite(pt.eval.objective) && constraint_violation(pt.eval) <= config_.feas_tol;
      };
      // keep a feasible first pass unless the fallback ends feasible and better
      const bool take = feasible(next.point)
                            ? !feasible(o.point) || next.point.eval.objective <= o.point.eval.objective
                            : !feasible(o.point) && constraint_violation(next.point.eval) < constraint_violation(o.point.eval);
      if (take) {
        next.iterations = o.iterations;
        o = std::move(next);
      }
    }
    diag.violation = constraint_violation(o.point.eval);
    diag.value = sign_ * o.point.eval.objective;
    diag.converged = o.converged && diag.violation <= config_.feas_tol;
    x_out = o.point.x;
    return diag;
  }

 private:
  const NlpProblem& problem_;
  double sign_;
  const SolverConfig& config_;
};

}  // namespace detail

/// Multistart SQP. Each start is solved independently; the reported optimum
/// is the best feasible end point (ties resolved by the lowest start index).
inline NlpSolution solve(const NlpProblem& problem, Direction direction, const SolverConfig& config = {}) {
  require(problem.dimension > 0, ErrorCode::DimensionMismatch, "solve: dimension must be positive");
  require(!problem.starts.empty(), ErrorCode::NoFeasibleStart, "solve: at least one start is required");
  require(static_cast<bool>(problem.evaluate), ErrorCode::DomainError, "solve: evaluate callback missing");
  const double sign = direction == Direction::Maximize ? -1.0 : 1.0;
  detail::SqpRun runner(problem, sign, config);

  NlpSolution best;
  best.diagnostics.reserve(problem.starts.size());
  for (std::size_t s = 0; s < problem.starts.size(); ++s) {
    require(problem.starts[s].size() == problem.dimension, ErrorCode::DimensionMismatch, "solve: start dimension");
    Vector x;
    StartDiagnostic diag = runner.run(problem.starts[s], x);
    best.diagnostics.push_back(diag);
    if (!(diag.violation <= config.feas_tol) || !std::isfinite(diag.value)) continue;
    const bool better = best.start_index < 0 ||
                        (direction == Direction::Maximize ? diag.value > best.value : diag.value < best.value);
    if (better) {
      best.x = x;
      best.value = diag.value;
      best.feasibility_violation = diag.violation;
      best.converged = diag.converged;
      best.start_index = static_cast<int>(s);
    }
  }
  if (best.start_index < 0) {
    std::string msg = "no start reached feasibility; violations:";
    for (const auto& d : best.diagnostics) msg += " " + std::to_string(d.violation);
    throw Error(ErrorCode::NoFeasibleStart, msg);
  }
  return best;
}

}  // namespace svarproj
