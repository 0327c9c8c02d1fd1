#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "svarproj/chi2.hpp"

using namespace svarproj;

namespace {

// P(chi2_1 <= x) = integral of 2 phi(u) over [0, sqrt(x)], composite Simpson.
double chi2_1_cdf_by_quadrature(double x) {
  const int m = 2000;
  const double b = std::sqrt(x), h = b / m;
  auto f = [](double u) { return 2.0 * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); };
  double s = f(0.0) + f(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Chi2, QuantileAnchor) { EXPECT_NEAR(chi2_quantile(27, 0.68), 29.87, 0.02); }

TEST(Chi2, MedianOfOneDofMatchesQuadrature) {
  double lo = 0.0, hi = 5.0;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (chi2_1_cdf_by_quadrature(mid) < 0.5 ? lo : hi) = mid;
  }
  EXPECT_NEAR(chi2_quantile(1, 0.5), 0.5 * (lo + hi), 1e-6);
  EXPECT_NEAR(chi2_quantile(1, 0.5), 0.4549, 1e-3);
}

TEST(Chi2, CdfInvertsQuantile) {
  for (double dof : {0.5, 1.0, 3.7, 27.0, 100.0})
    for (double p : {0.01, 0.32, 0.68, 0.95}) EXPECT_NEAR(chi2_cdf(dof, chi2_quantile(dof, p)), p, 1e-12);
}

TEST(Chi2, EffectiveDofRoundTrip) {
  EXPECT_NEAR(effective_dof(chi2_quantile(4.5, 0.68), 0.68), 4.5, 1e-6);
  for (double dof : {0.3, 1.0, 7.25, 27.0, 250.0})
    EXPECT_NEAR(effective_dof(chi2_quantile(dof, 0.9), 0.9), dof, 1e-6 * std::max(1.0, dof));
}

TEST(Chi2, DomainErrors) {
  EXPECT_THROW(chi2_quantile(3, 0.0), Error);
  EXPECT_THROW(chi2_quantile(3, 1.0), Error);
  EXPECT_THROW(chi2_quantile(0, 0.5), Error);
  EXPECT_THROW(effective_dof(1.0, 1.5), Error);
}
