#pragma once

// Thin wrappers over Boost's Gauss-Kronrod rules. Boost 1.74 returns the
// non-adaptive error estimate on the reference interval [-1, 1] without the
// Jacobian factor, which also breaks its own adaptive driver on short
// intervals; these helpers rescale the estimate and do the bisection here.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

namespace pmlab::detail {

template <unsigned N, class F>
double gk_rule(F& f, double lo, double hi, double& err) {
  const double v =
      boost::math::quadrature::gauss_kronrod<double, N>::integrate(f, lo, hi, 0, 0.0, &err);
  err *= 0.5 * (hi - lo);
  return v;
}

/// Adaptive bisection until the local estimate meets its share of abs_tol,
/// or falls below rel_floor |I| on the piece (the noise level of f).
template <class F>
double gk_adaptive(F& f, double lo, double hi, double abs_tol, int depth, double& err,
                   double rel_floor = 0.0) {
  const double v = gk_rule<31>(f, lo, hi, err);
  if (err <= abs_tol || err <= rel_floor * std::abs(v) || depth <= 0) return v;
  const double mid = 0.5 * (lo + hi);
  double e1 = 0.0, e2 = 0.0;
  const double r = gk_adaptive(f, lo, mid, 0.5 * abs_tol, depth - 1, e1, rel_floor) +
                   gk_adaptive(f, mid, hi, 0.5 * abs_tol, depth - 1, e2, rel_floor);
  err = e1 + e2;
  return r;
}

}  // namespace pmlab::detail
