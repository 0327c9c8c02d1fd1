#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "svarproj/projection.hpp"
#include "test_util.hpp"

using namespace svarproj;

namespace {

Restriction sign(int i, int j, int k, Sense s, double bound = 0.0) {
  Restriction r;
  r.kind = RestrictionKind::SignIrf;
  r.i = i;
  r.j = j;
  r.k = k;
  r.sense = s;
  r.bound = bound;
  return r;
}

RestrictionSet positive_scalar(double bound = 0.0) {
  RestrictionSet s;
  s.items = {sign(0, 0, 0, Sense::Geq, bound)};
  return s;
}

RestrictionSet two_column_pattern() {
  RestrictionSet s;
  s.items = {sign(0, 0, 0, Sense::Geq), sign(1, 0, 0, Sense::Geq), sign(0, 1, 0, Sense::Leq),
             sign(1, 1, 0, Sense::Geq)};
  return s;
}

ReducedForm bivariate_sample(std::uint64_t seed, int T = 200) {
  Matrix A(2, 2);
  A << 0.5, 0.1, 0.2, 0.4;
  Matrix S(2, 2);
  S << 1.0, 0.3, 0.3, 0.8;
  return estimate(test::simulate_var(A, S, T + 1, seed), VarSpec{2, 1});
}

}  // namespace

TEST(Wald, FormAndMembership) {
  Matrix omega = Matrix::Identity(2, 2) * 4.0;
  WaldEllipsoid w{Vector::Zero(2), omega, 100.0, 1.0};
  Vector mu(2);
  mu << 0.2, 0.0;
  EXPECT_NEAR(w.form(mu), 100.0 * 0.04 / 4.0, 1e-14);
  EXPECT_TRUE(w.contains(mu));
  mu(0) = 0.21;
  EXPECT_FALSE(w.contains(mu));
}

// For n = 1 with b >= 0 the response at impact is sqrt(Sigma); over a diagonal
// ellipsoid Sigma ranges over Sigma_hat +- sqrt(c w / T).
TEST(Projection, ScalarClosedForm) {
  Matrix omega(2, 2);
  omega << 0.5, 0.0, 0.0, 2.0;
  auto rf = test::manual_rf(test::scalar(0.4), test::scalar(1.5), omega, 400);
  ProjectionProblem problem(rf, positive_scalar());
  for (double c : {0.5, 2.0, 9.0}) {
    auto iv = problem.interval(Target{0, 0, 0}, c);
    const double half = std::sqrt(c * 2.0 / 400.0);
    EXPECT_NEAR(iv.upper, std::sqrt(1.5 + half), 1e-7) << c;
    EXPECT_NEAR(iv.lower, std::sqrt(1.5 - half), 1e-7) << c;
    EXPECT_LE(iv.upper_detail.wald, c + 1e-6);
    EXPECT_EQ(iv.status, EndpointStatus::Ok);
  }
}

// Response a sqrt(Sigma) at horizon 1: swept over the ellipse boundary.
TEST(Projection, ScalarHorizonOneMatchesBoundarySweep) {
  Matrix omega(2, 2);
  omega << 0.6, 0.1, 0.1, 1.2;
  const int T = 150;
  const double c = 3.0;
  auto rf = test::manual_rf(test::scalar(0.5), test::scalar(1.0), omega, T);
  Matrix L = omega.llt().matrixL();
  double hi = -1e300, lo = 1e300;
  for (int g = 0; g < 200000; ++g) {
    double t = 2.0 * std::numbers::pi * g / 200000.0;
    Vector u(2);
    u << std::cos(t), std::sin(t);
    Vector mu = rf.mu + L * u * std::sqrt(c / T);
    double v = mu(0) * std::sqrt(mu(1));
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  ProjectionProblem problem(rf, positive_scalar());
  auto iv = problem.interval(Target{1, 0, 0}, c);
  EXPECT_NEAR(iv.upper, hi, 1e-6);
  EXPECT_NEAR(iv.lower, lo, 1e-6);
}

TEST(Projection, ZeroRadiusGivesPluginSet) {
  auto rf = bivariate_sample(1);
  auto rset = two_column_pattern();
  Target t{2, 1, 0};
  auto plug = bounds(rf.A, rf.Sigma, rset, t);
  auto reg = projection_region(rf, rset, {t}, 0.0);
  EXPECT_NEAR(reg.intervals[0].upper, plug.upper, 1e-6);
  EXPECT_NEAR(reg.intervals[0].lower, plug.lower, 1e-6);
  Vector lo(1), up(1);
  lo << plug.lower;
  up << plug.upper;
  EXPECT_TRUE(contains(reg, lo, up));
  EXPECT_NEAR(project_endpoint(rf, rset, t, 0.0, Direction::Maximize).value, plug.upper, 1e-6);
}

TEST(Projection, RadiusMonotonicityAndContainment) {
  auto rf = bivariate_sample(2);
  auto rset = two_column_pattern();
  std::vector<Target> targets{{0, 0, 0}, {1, 1, 0}, {3, 0, 1}};
  ProjectionProblem shared(rf, rset);
  std::vector<ProjectionRegion> regions;
  for (double c : {0.0, 0.5, 2.0, chi2_quantile(7, 0.68), 12.0}) regions.push_back(shared.region(targets, c));
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (std::size_t h = 0; h < targets.size(); ++h) {
      const auto& iv = regions[r].intervals[h];
      ASSERT_EQ(iv.status, EndpointStatus::Ok);
      EXPECT_LE(iv.upper_detail.wald, regions[r].c + 1e-6);
      EXPECT_LE(iv.lower_detail.wald, regions[r].c + 1e-6);
      EXPECT_GE(iv.upper, iv.plugin_upper - 1e-12);
      EXPECT_LE(iv.lower, iv.plugin_lower + 1e-12);
      if (r == 0) continue;
      const auto& prev = regions[r - 1].intervals[h];
      EXPECT_GE(iv.upper, prev.upper - 1e-6);
      EXPECT_LE(iv.lower, prev.lower + 1e-6);
    }
  }
  // independently solved radii agree with the nesting as well
  auto small = projection_region(rf, rset, targets, 1.0);
  auto large = projection_region(rf, rset, targets, 6.0);
  for (std::size_t h = 0; h < targets.size(); ++h) {
    EXPECT_GE(large.intervals[h].upper, small.intervals[h].upper - 1e-6);
    EXPECT_LE(large.intervals[h].lower, small.intervals[h].lower + 1e-6);
  }
}

TEST(Projection, ArgmaxSatisfiesRestrictions) {
  auto rf = bivariate_sample(3);
  auto rset = two_column_pattern();
  auto e = project_endpoint(rf, rset, Target{1, 0, 1}, 5.0, Direction::Maximize);
  auto u = unpack_mu(e.mu, 2, 1);
  EXPECT_TRUE(evaluate(u.A, u.Sigma, e.B, rset, 1e-7).feasible);
  EXPECT_NEAR(structural_irf(u.A, e.B, Target{1, 0, 1}), e.value, 1e-9);
  EXPECT_LE(e.wald, 5.0 + 1e-6);
  EXPECT_GT(e.stability_margin, 0.0);
}

TEST(Projection, EmptyAtCenterSearchesEllipsoid) {
  Matrix omega = Matrix::Identity(2, 2);
  auto rf = test::manual_rf(test::scalar(0.3), test::scalar(0.9), omega, 100);
  // b >= 1 needs Sigma >= 1; the ellipsoid reaches Sigma = 0.9 + sqrt(4/100) = 1.1
  ProjectionProblem problem(rf, positive_scalar(1.0));
  auto iv = problem.interval(Target{0, 0, 0}, 4.0);
  EXPECT_EQ(iv.status, EndpointStatus::EmptyAtCenter);
  EXPECT_NEAR(iv.upper, std::sqrt(1.1), 1e-7);
  EXPECT_NEAR(iv.lower, 1.0, 1e-7);
  EXPECT_TRUE(std::isnan(iv.plugin_upper));
  // ellipsoid too small to reach the restriction
  ProjectionProblem tight(rf, positive_scalar(1.0));
  EXPECT_EQ(tight.interval(Target{0, 0, 0}, 0.5).status, EndpointStatus::Failed);
}

TEST(Projection, StrictStabilityKeepsArgmaxStable) {
  // near unit root: the ellipsoid reaches a > 1
  Matrix omega = Matrix::Identity(2, 2);
  auto rf = test::manual_rf(test::scalar(0.95), test::scalar(1.0), omega, 50);
  ProjectionConfig cfg;
  auto loose = project_endpoint(rf, positive_scalar(), Target{4, 0, 0}, 4.0, Direction::Maximize, cfg);
  EXPECT_GT(loose.stability_margin, 1.0);
  cfg.strict_stability = true;
  auto strict = project_endpoint(rf, positive_scalar(), Target{4, 0, 0}, 4.0, Direction::Maximize, cfg);
  EXPECT_LE(strict.stability_margin, 1.0 - 1e-6 + 1e-8);
  EXPECT_LE(strict.value, loose.value + 1e-9);
}

TEST(Contains, ValueAndBoundVectors) {
  ProjectionRegion reg;
  reg.intervals.resize(2);
  reg.intervals[0].lower = -1.0;
  reg.intervals[0].upper = 1.0;
  reg.intervals[1].lower = 0.0;
  reg.intervals[1].upper = 2.0;
  Vector v(2);
  v << 1.0, 0.0;
  EXPECT_TRUE(contains(reg, v));
  v << 1.001, 0.0;
  EXPECT_FALSE(contains(reg, v));
  Vector lo(2), up(2);
  lo << -0.5, 0.5;
  up << 0.5, 2.0;
  EXPECT_TRUE(contains(reg, lo, up));
  up(1) = 2.001;
  EXPECT_FALSE(contains(reg, lo, up));
  EXPECT_THROW(contains(reg, Vector::Zero(3)), Error);
}

// Shrinking c until a fixed identified set drops out: the threshold grows
// with the set's distance from the estimate.
TEST(Contains, ThresholdMonotoneInDistance) {
  Matrix omega = Matrix::Identity(2, 2);
  auto rf = test::manual_rf(test::scalar(0.4), test::scalar(1.0), omega, 100);
  ProjectionProblem problem(rf, positive_scalar());
  auto threshold = [&](double value) {
    double lo = 0.0, hi = 50.0;
    for (int it = 0; it < 40; ++it) {
      double mid = 0.5 * (lo + hi);
      auto reg = problem.region({Target{0, 0, 0}}, mid);
      Vector v(1);
      v << value;
      (contains(reg, v) ? hi : lo) = mid;
    }
    return hi;
  };
  double near = threshold(1.02), far = threshold(1.05);
  EXPECT_LT(near, far);
  // sqrt(1 + sqrt(c / 100)) = v  =>  c = 100 (v^2 - 1)^2
  EXPECT_NEAR(far, 100.0 * std::pow(1.05 * 1.05 - 1.0, 2), 1e-5);
}
