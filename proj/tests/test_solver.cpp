#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "svarproj/random.hpp"
#include "svarproj/solver.hpp"

using namespace svarproj;

namespace {

Vector v(std::initializer_list<double> init) {
  Vector out(static_cast<Eigen::Index>(init.size()));
  Eigen::Index i = 0;
  for (double x : init) out(i++) = x;
  return out;
}

NlpProblem circle_problem() {
  NlpProblem p;
  p.dimension = 2;
  p.evaluate = [](const Vector& x) {
    NlpEvaluation e;
    e.objective = x(0);
    e.equalities = v({x.squaredNorm() - 1.0});
    e.inequalities = Vector(0);
    return e;
  };
  p.starts = {v({0.3, 0.8}), v({-0.5, -0.5})};
  return p;
}

// max b11 over 2x2 B with BB' = I, b11 >= 0, b21 >= 0; x = vec(B)
NlpProblem orthogonal_column_problem(std::uint64_t seed, int starts) {
  NlpProblem p;
  p.dimension = 4;
  p.evaluate = [](const Vector& x) {
    Eigen::Map<const Matrix> B(x.data(), 2, 2);
    Matrix S = B * B.transpose();
    NlpEvaluation e;
    e.objective = B(0, 0);
    e.equalities = v({S(0, 0) - 1.0, S(1, 0), S(1, 1) - 1.0});
    e.inequalities = v({B(0, 0), B(1, 0)});
    return e;
  };
  for (int s = 0; s < starts; ++s) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(s)});
    Matrix Q = haar_orthogonal(rng, 2);
    p.starts.push_back(Eigen::Map<const Vector>(Q.data(), 4));
  }
  return p;
}

}  // namespace

TEST(Solver, UnitCircleExtremum) {
  auto sol = solve(circle_problem(), Direction::Maximize);
  EXPECT_TRUE(sol.converged);
  EXPECT_NEAR(sol.value, 1.0, 1e-6);
  EXPECT_NEAR(sol.x(0), 1.0, 1e-6);
  EXPECT_NEAR(sol.x(1), 0.0, 1e-4);
  auto low = solve(circle_problem(), Direction::Minimize);
  EXPECT_NEAR(low.value, -1.0, 1e-6);
}

TEST(Solver, CauchySchwarz) {
  Rng rng = make_rng(3, {});
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + trial % 5;
    Vector c = standard_normal_vector(rng, m);
    NlpProblem p;
    p.dimension = m;
    p.evaluate = [c](const Vector& x) {
      NlpEvaluation e;
      e.objective = c.dot(x);
      e.equalities = Vector(0);
      e.inequalities = v({1.0 - x.squaredNorm()});
      return e;
    };
    p.starts = {Vector::Zero(m), standard_normal_vector(rng, m) * 0.1};
    auto sol = solve(p, Direction::Maximize);
    EXPECT_NEAR(sol.value, c.norm(), 1e-6) << "trial " << trial;
    EXPECT_LE(sol.feasibility_violation, 1e-8);
  }
}

TEST(Solver, OrthogonalColumnMatchesAngleOracle) {
  // first column (cos t, sin t): b11 >= 0, b21 >= 0 means t in [0, pi/2]
  double oracle = -1.0;
  for (int g = 0; g <= 100000; ++g) {
    double t = 2.0 * std::numbers::pi * g / 100000.0;
    if (std::cos(t) >= 0.0 && std::sin(t) >= 0.0) oracle = std::max(oracle, std::cos(t));
  }
  auto sol = solve(orthogonal_column_problem(7, 10), Direction::Maximize);
  EXPECT_NEAR(sol.value, 1.0, 1e-6);
  EXPECT_NEAR(sol.value, oracle, 1e-6);
  auto low = solve(orthogonal_column_problem(7, 10), Direction::Minimize);
  EXPECT_NEAR(low.value, 0.0, 1e-6);
}

TEST(Solver, ConstrainedBenchmarkHs071) {
  // min x1 x4 (x1 + x2 + x3) + x3  s.t. x1 x2 x3 x4 >= 25, |x|^2 = 40, 1 <= x <= 5
  NlpProblem p;
  p.dimension = 4;
  p.evaluate = [](const Vector& x) {
    NlpEvaluation e;
    e.objective = x(0) * x(3) * (x(0) + x(1) + x(2)) + x(2);
    e.equalities = v({x.squaredNorm() - 40.0});
    Vector g(9);
    g(0) = x(0) * x(1) * x(2) * x(3) - 25.0;
    for (int i = 0; i < 4; ++i) {
      g(1 + i) = x(i) - 1.0;
      g(5 + i) = 5.0 - x(i);
    }
    e.inequalities = g;
    return e;
  };
  p.starts = {v({1, 5, 5, 1})};
  auto sol = solve(p, Direction::Minimize);
  EXPECT_NEAR(sol.value, 17.0140173, 1e-5);
  EXPECT_TRUE(sol.converged);
}

TEST(Solver, AddingStartsNeverWorsensOptimum) {
  double previous = -std::numeric_limits<double>::infinity();
  for (int starts = 1; starts <= 8; ++starts) {
    auto sol = solve(orthogonal_column_problem(42, starts), Direction::Maximize);
    EXPECT_GE(sol.value, previous - 1e-15);
    previous = sol.value;
  }
}

TEST(Solver, DeterministicForIdenticalInputs) {
  auto a = solve(orthogonal_column_problem(5, 6), Direction::Minimize);
  auto b = solve(orthogonal_column_problem(5, 6), Direction::Minimize);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.start_index, b.start_index);
  EXPECT_TRUE((a.x.array() == b.x.array()).all());
}

TEST(Solver, ReturnedPointIsFeasible) {
  auto p = orthogonal_column_problem(9, 5);
  for (auto dir : {Direction::Maximize, Direction::Minimize}) {
    auto sol = solve(p, dir);
    auto e = p.evaluate(sol.x);
    EXPECT_LE(e.equalities.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GE(e.inequalities.minCoeff(), -1e-8);
  }
}

TEST(Solver, InfeasibleProblemReportsNoFeasibleStart) {
  NlpProblem p;
  p.dimension = 1;
  p.evaluate = [](const Vector& x) {
    NlpEvaluation e;
    e.objective = x(0);
    e.equalities = Vector(0);
    e.inequalities = v({x(0), -x(0) - 0.5});
    return e;
  };
  p.starts = {v({0.0}), v({1.0})};
  try {
    solve(p, Direction::Maximize);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleStart);
  }
}

TEST(Solver, InfeasibleStartIsRepairedByFallback) {
  // start far outside a disk whose linearization is fine but whose
  // equality linearization at the origin is degenerate
  NlpProblem p;
  p.dimension = 2;
  p.evaluate = [](const Vector& x) {
    NlpEvaluation e;
    e.objective = x(0) + x(1);
    e.equalities = v({x.squaredNorm() - 4.0});
    e.inequalities = v({x(0) - 0.5});
    return e;
  };
  p.starts = {v({0.0, 0.0})};
  auto sol = solve(p, Direction::Maximize);
  EXPECT_NEAR(sol.value, 2.0 * std::sqrt(2.0), 1e-6);
}

TEST(Solver, AnalyticDerivativesMatchFiniteDifferences) {
  NlpProblem p = orthogonal_column_problem(1, 1);
  p.derivatives = [](const Vector& x) {
    NlpDerivatives d;
    d.gradient = v({1, 0, 0, 0});
    // equalities: b11^2 + b12^2 - 1, b21 b11 + b22 b12, b21^2 + b22^2 - 1; x = (b11, b21, b12, b22)
    d.equality_jacobian.resize(3, 4);
    d.equality_jacobian << 2 * x(0), 0, 2 * x(2), 0,
                           x(1), x(0), x(3), x(2),
                           0, 2 * x(1), 0, 2 * x(3);
    d.inequality_jacobian = Matrix::Zero(2, 4);
    d.inequality_jacobian(0, 0) = 1;
    d.inequality_jacobian(1, 1) = 1;
    return d;
  };
  Rng rng = make_rng(2, {});
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = standard_normal_vector(rng, 4);
    auto analytic = p.derivatives(x);
    auto fd = finite_difference_derivatives(p.evaluate, x, p.evaluate(x), true, 1e-6);
    auto rel = [](const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, a.norm()); };
    EXPECT_LT(rel(analytic.gradient, fd.gradient), 1e-4);
    EXPECT_LT(rel(analytic.equality_jacobian, fd.equality_jacobian), 1e-4);
    EXPECT_LT(rel(analytic.inequality_jacobian, fd.inequality_jacobian), 1e-4);
  }
  auto sol = solve(p, Direction::Maximize);
  EXPECT_NEAR(sol.value, 1.0, 1e-6);
}
