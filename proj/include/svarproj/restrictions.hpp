#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/linalg.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

enum class RestrictionKind { SignIrf, ZeroIrf, ZeroB, ZeroBinv, SignLongrun, ZeroLongrun, LinearB };

enum class Sense { Geq, Leq, Eq };

inline std::string_view to_string(RestrictionKind kind) {
  switch (kind) {
    case RestrictionKind::SignIrf: return "sign_irf";
    case RestrictionKind::ZeroIrf: return "zero_irf";
    case RestrictionKind::ZeroB: return "zero_b";
    case RestrictionKind::ZeroBinv: return "zero_binv";
    case RestrictionKind::SignLongrun: return "sign_longrun";
    case RestrictionKind::ZeroLongrun: return "zero_longrun";
    case RestrictionKind::LinearB: return "linear_b";
  }
  return "unknown";
}

inline std::string_view to_string(Sense sense) {
  switch (sense) {
    case Sense::Geq: return ">=";
    case Sense::Leq: return "<=";
    case Sense::Eq: return "=";
  }
  return "?";
}

/// One term of a linear_b restriction: coefficient * e_variable' C_horizon(A) B e_j.
struct WeightTerm {
  int variable = 0;
  int horizon = 0;
  double coefficient = 1.0;
};

struct Restriction {
  RestrictionKind kind = RestrictionKind::SignIrf;
  int i = 0;
  int j = 0;
  int k = 0;
  Sense sense = Sense::Geq;
  double bound = 0.0;
  bool cumulative = false;
  std::vector<WeightTerm> weights;
};

struct RestrictionSet {
  std::vector<Restriction> items;
  std::vector<std::string> shock_labels;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

/// c' (B e_shock) <sense> bound
struct ConstraintRow {
  Vector c;
  int shock = 0;
  Sense sense = Sense::Geq;
  double bound = 0.0;

  /// Signed slack: non-negative when an inequality holds; the raw residual for equalities.
  double slack(const Matrix& B) const {
    double v = c.dot(B.col(shock));
    switch (sense) {
      case Sense::Geq: return v - bound;
      case Sense::Leq: return bound - v;
      case Sense::Eq: return v - bound;
    }
    return 0.0;
  }
};

inline bool is_zero_kind(RestrictionKind kind) {
  return kind == RestrictionKind::ZeroIrf || kind == RestrictionKind::ZeroB ||
         kind == RestrictionKind::ZeroBinv || kind == RestrictionKind::ZeroLongrun;
}

inline bool is_sign_kind(RestrictionKind kind) {
  return kind == RestrictionKind::SignIrf || kind == RestrictionKind::SignLongrun;
}

inline void validate(const RestrictionSet& rset, int n) {
  auto in_range = [n](int idx) { return idx >= 0 && idx < n; };
  for (std::size_t r = 0; r < rset.items.size(); ++r) {
    const auto& it = rset.items[r];
    auto check = [&](bool ok, const char* what) {
      if (!ok)
        throw Error(ErrorCode::InvalidRestriction, "restriction " + std::to_string(r + 1) + " (" +
                                                       std::string(to_string(it.kind)) + "): " + what);
    };
    check(in_range(it.j), "shock index out of range");
    if (it.kind == RestrictionKind::LinearB) {
      check(!it.weights.empty(), "needs at least one weight term");
      for (const auto& w : it.weights) {
        check(in_range(w.variable), "weight variable out of range");
        check(w.horizon >= 0, "weight horizon must be >= 0");
      }
    } else {
      check(in_range(it.i), "variable index out of range");
    }
    check(it.k >= 0, "horizon must be >= 0");
    if (is_sign_kind(it.kind)) check(it.sense != Sense::Eq, "sign restriction needs >= or <=");
    if (is_zero_kind(it.kind)) check(it.sense == Sense::Eq, "zero restriction needs =");
  }
}

/// Every shock column that carries a restriction must carry at least one
/// inequality, otherwise the identified set is sign-symmetric.
inline void require_sign_normalization(const RestrictionSet& rset, int n) {
  require(!rset.empty(), ErrorCode::NormalizationMissing, "restriction set is empty");
  std::vector<int> any(n, 0), ineq(n, 0);
  for (const auto& it : rset.items) {
    any[it.j] = 1;
    if (it.sense != Sense::Eq) ineq[it.j] = 1;
  }
  for (int j = 0; j < n; ++j)
    require(!any[j] || ineq[j], ErrorCode::NormalizationMissing,
            "shock " + std::to_string(j + 1) + " has restrictions but no sign restriction");
}

inline int max_horizon(const RestrictionSet& rset) {
  int k = 0;
  for (const auto& it : rset.items) {
    if (it.kind == RestrictionKind::SignIrf || it.kind == RestrictionKind::ZeroIrf) k = std::max(k, it.k);
    for (const auto& w : it.weights) k = std::max(k, w.horizon);
  }
  return k;
}

/// Reduces each restriction to a linear form in the column B e_j.
inline std::vector<ConstraintRow> constraint_rows(const Matrix& A, const Matrix& Sigma, const RestrictionSet& rset) {
  const int n = static_cast<int>(Sigma.rows());
  require(A.rows() == n && A.cols() % n == 0, ErrorCode::DimensionMismatch, "constraint_rows: A must be n x np");
  validate(rset, n);

  const int kmax = max_horizon(rset);
  std::vector<Matrix> c = irf_matrices(A, kmax);
  std::vector<Matrix> csum(c.size());
  Matrix running = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < c.size(); ++k) {
    running += c[k];
    csum[k] = running;
  }
  auto response = [&](int k, bool cumulative) -> const Matrix& { return cumulative ? csum[k] : c[k]; };

  std::optional<Matrix> lr;
  std::optional<Matrix> sigma_inv;
  std::vector<ConstraintRow> rows;
  rows.reserve(rset.size());
  for (const auto& it : rset.items) {
    ConstraintRow row{Vector::Zero(n), it.j, it.sense, it.bound};
    switch (it.kind) {
      case RestrictionKind::SignIrf:
      case RestrictionKind::ZeroIrf:
        row.c = response(it.k, it.cumulative).row(it.i).transpose();
        break;
      case RestrictionKind::ZeroB:
        row.c(it.i) = 1.0;
        break;
      case RestrictionKind::ZeroBinv:
        // B'^{-1} = Sigma^{-1} B
        if (!sigma_inv) sigma_inv = Sigma.ldlt().solve(Matrix::Identity(n, n));
        row.c = sigma_inv->row(it.i).transpose();
        break;
      case RestrictionKind::SignLongrun:
      case RestrictionKind::ZeroLongrun:
        if (!lr) lr = long_run_matrix(A);
        row.c = lr->row(it.i).transpose();
        break;
      case RestrictionKind::LinearB:
        for (const auto& w : it.weights) row.c += w.coefficient * response(w.horizon, it.cumulative).row(w.variable).transpose();
        break;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Evaluation {
  Vector residuals;  // constraint slacks, then vech(BB' - Sigma)
  bool feasible = false;
  double tol = 1e-6;
};

inline Evaluation evaluate(const Matrix& A, const Matrix& Sigma, const Matrix& B, const RestrictionSet& rset,
                           double tol = 1e-6) {
  const Eigen::Index n = Sigma.rows();
  require(B.rows() == n && B.cols() == n, ErrorCode::DimensionMismatch, "evaluate: B must be n x n");
  auto rows = constraint_rows(A, Sigma, rset);
  Evaluation ev;
  ev.tol = tol;
  ev.residuals.resize(static_cast<Eigen::Index>(rows.size()) + vech_size(n));
  bool ok = true;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double s = rows[r].slack(B);
    ev.residuals(static_cast<Eigen::Index>(r)) = s;
    ok = ok && (rows[r].sense == Sense::Eq ? std::abs(s) <= tol : s >= -tol);
  }
  Vector eq = vech(B * B.transpose() - Sigma);
  ev.residuals.tail(eq.size()) = eq;
  ok = ok && (eq.size() == 0 || eq.cwiseAbs().maxCoeff() <= tol);
  ev.feasible = ok;
  return ev;
}

/// Demand/supply labor-market restrictions: sign pattern [+ -; + +], linearized
/// elasticity bounds 0.27 <= b2/b1 <= 2 and -2.5 <= b4/b3 <= -0.15, and
/// |long-run employment response to demand| <= 2V.
inline RestrictionSet bh_labor_market_preset(double V) {
  require(V > 0.0, ErrorCode::DomainError, "bh_labor_market_preset: V must be positive");
  auto sign = [](int i, int j, Sense s) {
    Restriction r;
    r.kind = RestrictionKind::SignIrf;
    r.i = i;
    r.j = j;
    r.sense = s;
    return r;
  };
  auto linear = [](int j, std::vector<WeightTerm> w) {
    Restriction r;
    r.kind = RestrictionKind::LinearB;
    r.j = j;
    r.sense = Sense::Geq;
    r.weights = std::move(w);
    return r;
  };
  auto longrun = [](Sense s, double bound) {
    Restriction r;
    r.kind = RestrictionKind::SignLongrun;
    r.i = 1;
    r.j = 0;
    r.sense = s;
    r.bound = bound;
    return r;
  };
  RestrictionSet rset;
  rset.shock_labels = {"demand", "supply"};
  rset.items = {
      sign(0, 0, Sense::Geq),                            // b1 >= 0
      sign(1, 0, Sense::Geq),                            // b2 >= 0
      sign(0, 1, Sense::Leq),                            // -b3 >= 0
      sign(1, 1, Sense::Geq),                            // b4 >= 0
      linear(0, {{0, 0, 2.0}, {1, 0, -1.0}}),            // 2 b1 - b2 >= 0
      linear(0, {{1, 0, 1.0}, {0, 0, -0.27}}),           // b2 - 0.27 b1 >= 0
      linear(1, {{1, 0, 1.0}, {0, 0, 0.15}}),            // b4 + 0.15 b3 >= 0
      linear(1, {{0, 0, -2.5}, {1, 0, -1.0}}),           // -2.5 b3 - b4 >= 0
      longrun(Sense::Geq, -2.0 * V),                     // gamma + 2V >= 0
      longrun(Sense::Leq, 2.0 * V),                      // -gamma + 2V >= 0
  };
  return rset;
}

}  // namespace svarproj
