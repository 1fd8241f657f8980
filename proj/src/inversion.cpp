#include "pmlab/inversion.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "pmlab/errors.hpp"

namespace pmlab {

namespace {

constexpr double kClampRel = 1e-12;
constexpr int kMaxIter = 200;

}  // namespace

InversionContext::InversionContext(double epsilon, FluxSpec flux, double root_tol)
    : eps_(epsilon),
      eps2_(epsilon * epsilon),
      flux_(std::move(flux)),
      s_max_(flux_.kappa() / eps2_),
      xi_max_(flux_.ell() / eps2_),
      root_tol_(root_tol) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
}

double p_eps(const InversionContext& ctx, double s) {
  const double z = ctx.eps2() * s;
  return s * ctx.flux().q(z) - ctx.flux().q_tilde(z) / ctx.eps2();
}

double j_eps(const InversionContext& ctx, double xi) {
  const double xi_max = ctx.xi_max();
  if (!(xi >= 0.0) || xi > xi_max * (1.0 + kClampRel)) {
    std::ostringstream os;
    os.precision(17);
    os << "j_eps: xi = " << xi << " outside [0, " << xi_max
       << "] (epsilon too large for this potential?)";
    throw DomainError(os.str());
  }
  if (xi == 0.0) return 0.0;
  if (xi >= xi_max) return ctx.s_max();

  // P_eps is increasing on [0, s_max] with P' vanishing at both ends, so a
  // bracketing iteration is used: regula falsi with the Illinois weight, and
  // a bisection whenever the bracket fails to halve.
  double lo = 0.0;
  double hi = ctx.s_max();
  double f_lo = -xi;
  double f_hi = xi_max - xi;

  // Seed the bracket with the leading-order guess.
  const double guess = j_eps_asymptotic(ctx, xi);
  if (guess > lo && guess < hi) {
    const double fg = p_eps(ctx, guess) - xi;
    if (fg == 0.0) return guess;
    if (fg < 0.0) {
      lo = guess;
      f_lo = fg;
    } else {
      hi = guess;
      f_hi = fg;
    }
  }

  int side = 0;
  double width = hi - lo;
  for (int it = 0; it < kMaxIter; ++it) {
    const double x_tol = 4.0 * std::numeric_limits<double>::epsilon() * hi;
    if (hi - lo <= x_tol) break;

    double s = lo - f_lo * (hi - lo) / (f_hi - f_lo);
    if (!(s > lo && s < hi) || (hi - lo) > 0.5 * width) {
      // Forced bisection when secant stagnates.
      if ((hi - lo) > 0.5 * width) width = hi - lo;
      s = 0.5 * (lo + hi);
      side = 0;
    }
    const double fs = p_eps(ctx, s) - xi;
    if (fs == 0.0) return s;
    if (fs < 0.0) {
      lo = s;
      f_lo = fs;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = s;
      f_hi = fs;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  // Return the endpoint with the smaller residual.
  return std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
}

double j_eps_asymptotic(const InversionContext& ctx, double xi) {
  if (!(xi >= 0.0)) throw DomainError("j_eps_asymptotic requires xi >= 0");
  return std::sqrt(2.0 * xi / (ctx.eps2() * ctx.flux().q_prime0()));
}

}  // namespace pmlab
