#include <gtest/gtest.h>

#include "svarproj/qp.hpp"
#include "svarproj/random.hpp"

using namespace svarproj;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> init) {
  Matrix m(static_cast<Eigen::Index>(init.size()), static_cast<Eigen::Index>(init.begin()->size()));
  Eigen::Index i = 0;
  for (auto r : init) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(SolveQp, Unconstrained) {
  auto r = solve_qp(Matrix::Identity(2, 2), vec2(-1, -2), Matrix(0, 2), Vector(0), Matrix(0, 2), Vector(0));
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.x(0), 1.0, 1e-14);
  EXPECT_NEAR(r.x(1), 2.0, 1e-14);
}

TEST(SolveQp, EqualityMultiplierSign) {
  Vector ce0(1);
  ce0 << -1.0;
  auto r = solve_qp(Matrix::Identity(2, 2), Vector::Zero(2), rows({{1, 1}}), ce0, Matrix(0, 2), Vector(0));
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.x(0), 0.5, 1e-14);
  EXPECT_NEAR(r.x(1), 0.5, 1e-14);
  EXPECT_NEAR(r.eq_multipliers(0), 0.5, 1e-14);
}

TEST(SolveQp, InequalityMultiplierSign) {
  Vector ci0(1);
  ci0 << 1.0;
  auto r = solve_qp(Matrix::Identity(2, 2), vec2(-2, -2), Matrix(0, 2), Vector(0), rows({{-1, 0}}), ci0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.x(0), 1.0, 1e-14);
  EXPECT_NEAR(r.x(1), 2.0, 1e-14);
  EXPECT_NEAR(r.ineq_multipliers(0), 1.0, 1e-14);
}

TEST(SolveQp, DetectsInfeasibility) {
  Vector ci0(2);
  ci0 << -1.0, 0.0;
  auto r = solve_qp(Matrix::Identity(2, 2), Vector::Zero(2), Matrix(0, 2), Vector(0), rows({{1, 0}, {-1, 0}}), ci0);
  EXPECT_FALSE(r.feasible);
}

// KKT conditions on random feasible problems: the constraint offsets are
// built around a known interior point so every instance is feasible.
TEST(SolveQp, RandomProblemsSatisfyKkt) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng = make_rng(seed, {1});
    const int n = 2 + static_cast<int>(seed % 6);
    const int me = static_cast<int>(seed % 3) % n;
    const int mi = 1 + static_cast<int>(seed % 7);
    Matrix g = standard_normal_matrix(rng, n, n);
    Matrix G = g * g.transpose() + 0.1 * Matrix::Identity(n, n);
    Vector g0 = standard_normal_vector(rng, n) * 3.0;
    Vector x0 = standard_normal_vector(rng, n);
    Matrix CE = standard_normal_matrix(rng, me, n);
    Vector ce0 = -CE * x0;
    Matrix CI = standard_normal_matrix(rng, mi, n);
    Vector ci0 = -CI * x0 + Vector::Constant(mi, 0.5);
    auto r = solve_qp(G, g0, CE, ce0, CI, ci0);
    ASSERT_TRUE(r.feasible) << "seed " << seed;
    Vector stat = G * r.x + g0 - CE.transpose() * r.eq_multipliers - CI.transpose() * r.ineq_multipliers;
    EXPECT_LT(stat.cwiseAbs().maxCoeff(), 1e-9) << "seed " << seed;
    if (me > 0) EXPECT_LT((CE * r.x + ce0).cwiseAbs().maxCoeff(), 1e-9);
    Vector slack = CI * r.x + ci0;
    EXPECT_GT(slack.minCoeff(), -1e-9);
    EXPECT_GE(r.ineq_multipliers.minCoeff(), 0.0);
    EXPECT_LT(slack.cwiseProduct(r.ineq_multipliers).cwiseAbs().maxCoeff(), 1e-9);
  }
}
