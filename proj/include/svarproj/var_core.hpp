#pragma once

#include <complex>
#include <string>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/linalg.hpp"

namespace svarproj {

/// Observations in rows (oldest first), one column per variable.
struct TimeSeriesData {
  Matrix values;
  std::vector<std::string> names;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index variables() const { return values.cols(); }
};

struct VarSpec {
  int n = 1;
  int p = 1;
  bool demean = false;
  bool cumulative = false;
};

/// Dimension of the reduced-form vector mu = [vec(A); vech(Sigma)].
inline Eigen::Index mu_size(int n, int p) {
  return static_cast<Eigen::Index>(n) * n * p + vech_size(n);
}

struct ReducedForm {
  int n = 0;
  int p = 0;
  int T = 0;
  Matrix A;      // n x np, blocks A_1..A_p
  Matrix Sigma;  // n x n
  Vector mu;     // [vec(A); vech(Sigma)]
  Matrix Omega;  // d x d sandwich covariance
  Matrix QT;     // np x np, (1/T) sum X_t X_t'
  bool degenerate = false;  // Sigma not positive definite
  std::vector<std::string> warnings;

  Eigen::Index d() const { return mu.size(); }
};

/// Impulse-response coordinate (horizon k, response i, shock j); indices are
/// zero-based in the API and one-based in every file format.
struct Target {
  int k = 0;
  int i = 0;
  int j = 0;
  bool cumulative = false;

  friend bool operator==(const Target&, const Target&) = default;
};

inline Vector pack_mu(const Matrix& A, const Matrix& Sigma) {
  const Eigen::Index n = Sigma.rows();
  require(Sigma.cols() == n && A.rows() == n && n > 0 && A.cols() % n == 0,
          ErrorCode::DimensionMismatch, "pack_mu: A must be n x np and Sigma n x n");
  Vector mu(A.size() + vech_size(n));
  mu << vec(A), vech(Sigma);
  return mu;
}

struct UnpackedMu {
  Matrix A;
  Matrix Sigma;
};

inline UnpackedMu unpack_mu(const Vector& mu, int n, int p) {
  require(n >= 1 && p >= 1 && mu.size() == mu_size(n, p), ErrorCode::DimensionMismatch,
          "unpack_mu: mu has length " + std::to_string(mu.size()) + ", expected " +
              std::to_string(mu_size(n, p)));
  const Eigen::Index na = static_cast<Eigen::Index>(n) * n * p;
  return {unvec(mu.head(na), n, static_cast<Eigen::Index>(n) * p), unvech(mu.tail(vech_size(n)), n)};
}

inline Matrix lag_block(const Matrix& A, int m) {
  const Eigen::Index n = A.rows();
  return A.middleCols(static_cast<Eigen::Index>(m - 1) * n, n);
}

/// C_0..C_kmax with C_0 = I and C_k = sum_{m=1}^{min(k,p)} C_{k-m} A_m.
inline std::vector<Matrix> irf_matrices(const Matrix& A, int kmax) {
  const Eigen::Index n = A.rows();
  const int p = static_cast<int>(A.cols() / n);
  std::vector<Matrix> c;
  c.reserve(static_cast<std::size_t>(kmax) + 1);
  c.push_back(Matrix::Identity(n, n));
  for (int k = 1; k <= kmax; ++k) {
    Matrix ck = Matrix::Zero(n, n);
    for (int m = 1; m <= std::min(k, p); ++m) ck.noalias() += c[k - m] * lag_block(A, m);
    c.push_back(std::move(ck));
  }
  return c;
}

inline Matrix irf_matrix(const Matrix& A, int k) {
  require(k >= 0, ErrorCode::DomainError, "irf_matrix: horizon must be non-negative");
  return irf_matrices(A, k).back();
}

/// sum_{m=0}^{k} C_m(A)
inline Matrix cumulative_irf_matrix(const Matrix& A, int k) {
  auto c = irf_matrices(A, k);
  Matrix s = Matrix::Zero(A.rows(), A.rows());
  for (const auto& m : c) s += m;
  return s;
}

/// Response matrix for a target: C_k or its cumulative sum.
inline Matrix response_matrix(const Matrix& A, int k, bool cumulative) {
  return cumulative ? cumulative_irf_matrix(A, k) : irf_matrix(A, k);
}

inline double structural_irf(const Matrix& A, const Matrix& B, const Target& t) {
  Matrix c = response_matrix(A, t.k, t.cumulative);
  return c.row(t.i).dot(B.col(t.j));
}

inline Matrix companion_matrix(const Matrix& A) {
  const Eigen::Index n = A.rows();
  const Eigen::Index np = A.cols();
  Matrix f = Matrix::Zero(np, np);
  f.topRows(n) = A;
  if (np > n) f.bottomLeftCorner(np - n, np - n) = Matrix::Identity(np - n, np - n);
  return f;
}

/// (I - A_1 - ... - A_p)^{-1}
inline Matrix long_run_matrix(const Matrix& A) {
  const Eigen::Index n = A.rows();
  const int p = static_cast<int>(A.cols() / n);
  Matrix m = Matrix::Identity(n, n);
  for (int l = 1; l <= p; ++l) m -= lag_block(A, l);
  require(condition_number(m) < 1e10, ErrorCode::UnitRoot,
          "I - sum(A_m) is numerically singular");
  return m.partialPivLu().inverse();
}

/// Spectral radius of the companion matrix; below one means stable.
inline double stability_margin(const Matrix& A) {
  Matrix f = companion_matrix(A);
  Eigen::EigenSolver<Matrix> es(f, false);
  double r = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) r = std::max(r, std::abs(es.eigenvalues()(i)));
  return r;
}

namespace detail {

struct Regression {
  Matrix Y;  // n x T
  Matrix X;  // np x T
};

inline Regression build_regression(const TimeSeriesData& data, const VarSpec& spec) {
  const Eigen::Index rows = data.rows();
  const int n = spec.n;
  const int p = spec.p;
  const Eigen::Index T = rows - p;
  Regression r{Matrix(n, T), Matrix(static_cast<Eigen::Index>(n) * p, T)};
  for (Eigen::Index t = 0; t < T; ++t) {
    r.Y.col(t) = data.values.row(t + p).transpose();
    for (int l = 1; l <= p; ++l)
      r.X.block(static_cast<Eigen::Index>(l - 1) * n, t, n, 1) = data.values.row(t + p - l).transpose();
  }
  if (spec.demean) {
    // Centering regressand and regressors over the effective sample is the
    // intercept regression (Frisch-Waugh), so residuals have exactly zero mean.
    r.Y.colwise() -= r.Y.rowwise().mean();
    r.X.colwise() -= r.X.rowwise().mean();
  }
  return r;
}

inline void validate_data(const TimeSeriesData& data, const VarSpec& spec) {
  require(spec.n >= 1 && spec.p >= 1, ErrorCode::DomainError, "VarSpec requires n >= 1 and p >= 1");
  require(data.variables() == spec.n, ErrorCode::DimensionMismatch,
          "data has " + std::to_string(data.variables()) + " columns, spec.n = " + std::to_string(spec.n));
  require(data.values.allFinite(), ErrorCode::InputError, "data contains non-finite values");
  const Eigen::Index T = data.rows() - spec.p;
  require(T > static_cast<Eigen::Index>(spec.n) * spec.p + 1, ErrorCode::ShortSample,
          "effective sample T = " + std::to_string(T) + " must exceed n*p + 1 = " +
              std::to_string(spec.n * spec.p + 1));
}

}  // namespace detail

/// Least-squares reduced form. Omega is left empty; see asymptotic_covariance
/// or estimate().
inline ReducedForm ols_estimate(const TimeSeriesData& data, const VarSpec& spec) {
  detail::validate_data(data, spec);
  auto reg = detail::build_regression(data, spec);
  const Eigen::Index T = reg.Y.cols();
  const double invT = 1.0 / static_cast<double>(T);

  ReducedForm rf;
  rf.n = spec.n;
  rf.p = spec.p;
  rf.T = static_cast<int>(T);
  rf.QT = symmetrize(reg.X * reg.X.transpose() * invT);
  require(condition_number(rf.QT) < 1e12, ErrorCode::SingularDesign,
          "regressor second-moment matrix is numerically singular");
  Matrix yx = reg.Y * reg.X.transpose() * invT;
  rf.A = rf.QT.ldlt().solve(yx.transpose()).transpose();
  Matrix resid = reg.Y - rf.A * reg.X;
  rf.Sigma = symmetrize(resid * resid.transpose() * invT);
  rf.degenerate = !is_positive_definite(rf.Sigma) ||
                  Eigen::SelfAdjointEigenSolver<Matrix>(rf.Sigma).eigenvalues().minCoeff() <=
                      1e-12 * std::max(1.0, rf.Sigma.trace());
  if (rf.degenerate) rf.warnings.emplace_back("residual covariance is not positive definite");
  rf.mu = pack_mu(rf.A, rf.Sigma);
  return rf;
}

/// Sandwich covariance V M V' with V = blockdiag(Q_T^{-1} kron I_n, L_n).
inline Matrix asymptotic_covariance(const TimeSeriesData& data, const ReducedForm& rf, bool demean = false) {
  VarSpec spec{rf.n, rf.p, demean, false};
  detail::validate_data(data, spec);
  auto reg = detail::build_regression(data, spec);
  const Eigen::Index T = reg.Y.cols();
  require(T == rf.T, ErrorCode::DimensionMismatch, "reduced form was estimated on a different sample");
  require(condition_number(rf.QT) < 1e12, ErrorCode::SingularDesign,
          "regressor second-moment matrix is numerically singular");
  const Eigen::Index n = rf.n;
  const Eigen::Index np = n * rf.p;
  const Eigen::Index na = n * np;
  const Eigen::Index nm = na + n * n;

  Matrix resid = reg.Y - rf.A * reg.X;
  Matrix M = Matrix::Zero(nm, nm);
  Vector m(nm);
  for (Eigen::Index t = 0; t < T; ++t) {
    Vector eta = resid.col(t);
    Matrix ex = eta * reg.X.col(t).transpose();
    Matrix ee = eta * eta.transpose() - rf.Sigma;
    m << vec(ex), vec(ee);
    M.selfadjointView<Eigen::Lower>().rankUpdate(m);
  }
  M = M.selfadjointView<Eigen::Lower>();
  M /= static_cast<double>(T);

  Matrix qinv = rf.QT.ldlt().solve(Matrix::Identity(np, np));
  Matrix V = Matrix::Zero(rf.mu.size(), nm);
  V.topLeftCorner(na, na) = kron(qinv, Matrix::Identity(n, n));
  V.bottomRightCorner(vech_size(n), n * n) = elimination_matrix(n);
  return symmetrize(V * M * V.transpose());
}

/// ols_estimate followed by asymptotic_covariance.
inline ReducedForm estimate(const TimeSeriesData& data, const VarSpec& spec) {
  ReducedForm rf = ols_estimate(data, spec);
  rf.Omega = asymptotic_covariance(data, rf, spec.demean);
  return rf;
}

/// Ridge policy for inverting Omega in the Wald form: if the condition number
/// exceeds 1e12, add 1e-10 * trace/d to the diagonal.
struct RegularizedCovariance {
  Matrix Omega;
  bool ridged = false;
};

inline RegularizedCovariance regularize_covariance(const Matrix& omega) {
  RegularizedCovariance out{symmetrize(omega), false};
  const Eigen::Index d = omega.rows();
  if (d == 0) return out;
  if (condition_number(out.Omega) > 1e12) {
    double tr = out.Omega.trace();
    double eps = 1e-10 * (tr > 0.0 ? tr / static_cast<double>(d) : 1.0);
    out.Omega.diagonal().array() += eps;
    out.ridged = true;
  }
  return out;
}

/// Homoskedastic Gaussian ML variance: blockdiag(Q^{-1} kron Sigma, 2 D+ (Sigma kron Sigma) D+').
inline Matrix gaussian_ml_covariance(const Matrix& QT, const Matrix& Sigma) {
  const Eigen::Index n = Sigma.rows();
  Matrix qinv = QT.ldlt().solve(Matrix::Identity(QT.rows(), QT.cols()));
  Matrix D = duplication_matrix(n);
  Matrix Dplus = (D.transpose() * D).ldlt().solve(D.transpose());
  Matrix slope = kron(qinv, Sigma);
  Matrix cov = 2.0 * Dplus * kron(Sigma, Sigma) * Dplus.transpose();
  Matrix out = Matrix::Zero(slope.rows() + cov.rows(), slope.cols() + cov.cols());
  out.topLeftCorner(slope.rows(), slope.cols()) = slope;
  out.bottomRightCorner(cov.rows(), cov.cols()) = cov;
  return out;
}

}  // namespace svarproj
