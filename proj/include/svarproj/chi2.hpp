#pragma once

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "svarproj/common.hpp"

namespace svarproj {

/// P(X <= x) for X ~ chi2(dof).
inline double chi2_cdf(double dof, double x) {
  require(dof > 0.0, ErrorCode::DomainError, "chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

/// Inverse of chi2_cdf in x.
inline double chi2_quantile(double dof, double prob) {
  require(dof > 0.0, ErrorCode::DomainError, "chi2_quantile: dof must be positive");
  require(prob > 0.0 && prob < 1.0, ErrorCode::DomainError, "chi2_quantile: prob must lie in (0, 1)");
  return 2.0 * boost::math::gamma_p_inv(0.5 * dof, prob);
}

/// Fractional degrees of freedom whose chi2 quantile at `prob` equals c.
/// The quantile is increasing in dof, so bisection brackets the root and
/// Newton steps (derivative by central difference) finish it off.
inline double effective_dof(double c, double prob) {
  require(prob > 0.0 && prob < 1.0, ErrorCode::DomainError, "effective_dof: prob must lie in (0, 1)");
  if (c <= 0.0) return 0.0;
  auto f = [&](double df) { return chi2_quantile(df, prob) - c; };
  double lo = 1e-12;
  double hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    require(hi < 1e12, ErrorCode::DomainError, "effective_dof: radius too large");
  }
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    double fx = f(x);
    if (fx > 0.0) hi = x; else lo = x;
    if (hi - lo <= 1e-10 * std::max(1.0, x)) break;
    double h = 1e-6 * std::max(1e-3, x);
    double slope = (f(x + h) - f(std::max(x - h, 0.5 * x))) / (x + h - std::max(x - h, 0.5 * x));
    double next = slope > 0.0 ? x - fx / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-12 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace svarproj
