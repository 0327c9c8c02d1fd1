#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "svarproj/common.hpp"

namespace svarproj {

/// Solution of a strictly convex dense QP. Multipliers satisfy
/// G x + g0 = CE' eq_multipliers + CI' ineq_multipliers, ineq_multipliers >= 0.
struct QpResult {
  Vector x;
  double value = 0.0;
  bool feasible = false;
  Vector eq_multipliers;
  Vector ineq_multipliers;
};

namespace detail {

// Goldfarb-Idnani dual active-set method, following the layout of the
// classic QuadProg implementation (J = L^{-T}, R upper triangular).
class GoldfarbIdnani {
 public:
  GoldfarbIdnani(const Matrix& G, const Vector& g0, const Matrix& CE, const Vector& ce0, const Matrix& CI,
                 const Vector& ci0)
      : G_(G), g0_(g0), CE_(CE), ce0_(ce0), CI_(CI), ci0_(ci0) {}

  QpResult solve() {
    const Eigen::Index n = G_.rows();
    const Eigen::Index me = CE_.rows();
    const Eigen::Index mi = CI_.rows();
    const double inf = std::numeric_limits<double>::infinity();
    const double eps = std::numeric_limits<double>::epsilon();

    QpResult out;
    out.eq_multipliers = Vector::Zero(me);
    out.ineq_multipliers = Vector::Zero(mi);

    Eigen::LLT<Matrix> llt(G_);
    if (llt.info() != Eigen::Success) {
      out.x = Vector::Zero(n);
      return out;
    }
    Matrix L = llt.matrixL();
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
    R_ = Matrix::Zero(n, n);
    const double c1 = G_.trace();
    const double c2 = J_.trace();
    double R_norm = 1.0;

    x_ = -llt.solve(g0_);
    double f = 0.5 * g0_.dot(x_);

    const Eigen::Index mtot = me + mi;
    A_.assign(static_cast<std::size_t>(mtot + n + 1), 0);
    u_ = Vector::Zero(mtot + n + 1);
    d_ = Vector::Zero(n);
    z_ = Vector::Zero(n);
    r_ = Vector::Zero(mtot + n + 1);
    iq_ = 0;

    for (Eigen::Index i = 0; i < me; ++i) {
      Vector np = CE_.row(i).transpose();
      d_ = J_.transpose() * np;
      update_z();
      update_r();
      double t2 = 0.0;
      if (z_.squaredNorm() > eps) t2 = (-np.dot(x_) - ce0_(i)) / z_.dot(np);
      x_ += t2 * z_;
      u_(iq_) = t2;
      u_.head(iq_) -= t2 * r_.head(iq_);
      f += 0.5 * t2 * t2 * z_.dot(np);
      A_[iq_] = static_cast<int>(-i - 1);
      if (!add_constraint(R_norm)) {
        // dependent equality constraints
        out.x = x_;
        out.value = inf;
        return out;
      }
    }

    std::vector<int> iai(static_cast<std::size_t>(mi));
    std::vector<char> iaexcl(static_cast<std::size_t>(mi), 1);
    for (Eigen::Index i = 0; i < mi; ++i) iai[i] = static_cast<int>(i);
    Vector s = Vector::Zero(mi);
    std::vector<int> A_old(A_.size(), 0);
    Vector u_old = Vector::Zero(u_.size());
    Vector x_old = x_;
    int ip = 0;
    int iter = 0;
    const int max_iter = static_cast<int>(50 * (mtot + n) + 100);

    auto finish = [&](bool feasible) {
      out.x = x_;
      out.value = feasible ? f : inf;
      out.feasible = feasible;
      for (Eigen::Index k = 0; k < iq_; ++k) {
        int a = A_[k];
        if (a < 0)
          out.eq_multipliers(-a - 1) = u_(k);
        else
          out.ineq_multipliers(a) = u_(k);
      }
      return out;
    };

    while (true) {  // step 1
      if (++iter > max_iter) return finish(false);
      for (Eigen::Index i = me; i < iq_; ++i) iai[A_[i]] = -1;
      double psi = 0.0;
      for (Eigen::Index i = 0; i < mi; ++i) {
        iaexcl[i] = 1;
        s(i) = CI_.row(i).dot(x_) + ci0_(i);
        psi += std::min(0.0, s(i));
      }
      if (std::abs(psi) <= static_cast<double>(mi) * eps * c1 * c2 * 100.0) return finish(true);
      for (Eigen::Index i = 0; i < iq_; ++i) {
        u_old(i) = u_(i);
        A_old[i] = A_[i];
      }
      x_old = x_;

      bool restart_step1 = false;
      while (!restart_step1) {  // step 2: pick the most violated constraint
        double ss = 0.0;
        for (Eigen::Index i = 0; i < mi; ++i) {
          if (s(i) < ss && iai[i] != -1 && iaexcl[i]) {
            ss = s(i);
            ip = static_cast<int>(i);
          }
        }
        if (ss >= 0.0) return finish(true);
        Vector np = CI_.row(ip).transpose();
        u_(iq_) = 0.0;
        A_[iq_] = ip;

        while (true) {  // step 2a
          if (++iter > max_iter) return finish(false);
          d_ = J_.transpose() * np;
          update_z();
          update_r();
          int l = 0;
          double t1 = inf;
          for (Eigen::Index k = me; k < iq_; ++k) {
            if (r_(k) > 0.0 && u_(k) / r_(k) < t1) {
              t1 = u_(k) / r_(k);
              l = A_[k];
            }
          }
          double t2 = inf;
          if (z_.squaredNorm() > eps) {
            t2 = -s(ip) / z_.dot(np);
            if (t2 < 0.0) t2 = inf;
          }
          double t = std::min(t1, t2);
          if (t >= inf) return finish(false);  // infeasible
          if (t2 >= inf) {
            // dual step only
            u_.head(iq_) -= t * r_.head(iq_);
            u_(iq_) += t;
            iai[l] = l;
            delete_constraint(l);
            continue;
          }
          x_ += t * z_;
          f += t * z_.dot(np) * (0.5 * t + u_(iq_));
          u_.head(iq_) -= t * r_.head(iq_);
          u_(iq_) += t;
          if (std::abs(t - t2) < eps) {
            // full step: ip becomes active
            if (!add_constraint(R_norm)) {
              iaexcl[ip] = 0;
              delete_constraint(ip);
              for (Eigen::Index i = 0; i < mi; ++i) iai[i] = static_cast<int>(i);
              for (Eigen::Index i = 0; i < iq_; ++i) {
                A_[i] = A_old[i];
                u_(i) = u_old(i);
                if (i >= me) iai[A_[i]] = -1;
              }
              x_ = x_old;
              break;  // back to step 2
            }
            iai[ip] = -1;
            restart_step1 = true;
            break;
          }
          // partial step: drop the blocking constraint and retry ip
          iai[l] = l;
          delete_constraint(l);
          s(ip) = CI_.row(ip).dot(x_) + ci0_(ip);
        }
      }
    }
  }

 private:
  void update_z() {
    const Eigen::Index n = J_.rows();
    z_ = J_.rightCols(n - iq_) * d_.tail(n - iq_);
  }

  void update_r() {
    for (Eigen::Index i = iq_ - 1; i >= 0; --i) {
      double sum = 0.0;
      for (Eigen::Index j = i + 1; j < iq_; ++j) sum += R_(i, j) * r_(j);
      r_(i) = (d_(i) - sum) / R_(i, i);
    }
  }

  bool add_constraint(double& R_norm) {
    const Eigen::Index n = J_.rows();
    for (Eigen::Index j = n - 1; j >= iq_ + 1; --j) {
      double cc = d_(j - 1);
      double ss = d_(j);
      double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n; ++k) {
        double t1 = J_(k, j - 1);
        double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    for (Eigen::Index i = 0; i < iq_; ++i) R_(i, iq_ - 1) = d_(i);
    if (std::abs(d_(iq_ - 1)) <= std::numeric_limits<double>::epsilon() * R_norm) return false;
    R_norm = std::max(R_norm, std::abs(d_(iq_ - 1)));
    return true;
  }

  void delete_constraint(int l) {
    const Eigen::Index n = J_.rows();
    const Eigen::Index me = CE_.rows();
    Eigen::Index qq = -1;
    for (Eigen::Index i = me; i < iq_; ++i)
      if (A_[i] == l) {
        qq = i;
        break;
      }
    if (qq < 0) return;
    for (Eigen::Index i = qq; i < iq_ - 1; ++i) {
      A_[i] = A_[i + 1];
      u_(i) = u_(i + 1);
      R_.col(i) = R_.col(i + 1);
    }
    A_[iq_ - 1] = A_[iq_];
    u_(iq_ - 1) = u_(iq_);
    A_[iq_] = 0;
    u_(iq_) = 0.0;
    for (Eigen::Index j = 0; j < iq_; ++j) R_(j, iq_ - 1) = 0.0;
    --iq_;
    if (iq_ == 0) return;
    for (Eigen::Index j = qq; j < iq_; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      double xny = ss / (1.0 + cc);
      for (Eigen::Index k = j + 1; k < iq_; ++k) {
        double t1 = R_(j, k);
        double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        double t1 = J_(k, j);
        double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  const Matrix& G_;
  const Vector& g0_;
  const Matrix& CE_;
  const Vector& ce0_;
  const Matrix& CI_;
  const Vector& ci0_;
  Matrix J_, R_;
  Vector x_, u_, d_, z_, r_;
  std::vector<int> A_;
  Eigen::Index iq_ = 0;
};

}  // namespace detail

/// min 0.5 x'Gx + g0'x  s.t.  CE x + ce0 = 0,  CI x + ci0 >= 0  (constraints as rows).
inline QpResult solve_qp(const Matrix& G, const Vector& g0, const Matrix& CE, const Vector& ce0, const Matrix& CI,
                         const Vector& ci0) {
  const Eigen::Index n = G.rows();
  require(G.cols() == n && g0.size() == n, ErrorCode::DimensionMismatch, "solve_qp: objective dimensions");
  require(CE.rows() == ce0.size() && (CE.rows() == 0 || CE.cols() == n), ErrorCode::DimensionMismatch,
          "solve_qp: equality dimensions");
  require(CI.rows() == ci0.size() && (CI.rows() == 0 || CI.cols() == n), ErrorCode::DimensionMismatch,
          "solve_qp: inequality dimensions");
  Matrix ce = CE.rows() == 0 ? Matrix(0, n) : CE;
  Matrix ci = CI.rows() == 0 ? Matrix(0, n) : CI;
  detail::GoldfarbIdnani gi(G, g0, ce, ce0, ci, ci0);
  return gi.solve();
}

}  // namespace svarproj
