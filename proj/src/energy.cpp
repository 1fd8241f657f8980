#include "pmlab/energy.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "pmlab/errors.hpp"

namespace pmlab {

namespace {

// Integral over [0, len] of |d| for d linear from d0 to d1.
double abs_linear(double d0, double d1, double len) {
  if ((d0 >= 0.0 && d1 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0)) {
    return 0.5 * (std::abs(d0) + std::abs(d1)) * len;
  }
  return 0.5 * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1)) * len;
}

void require_valid_epsilon(const ModelParams& m) {
  const double e0 = eps0_of(m.flux, m.potential);
  if (!(m.epsilon < e0)) {
    throw DomainError("epsilon must be below eps0 = " + std::to_string(e0));
  }
}

}  // namespace

EnergyBreakdown energy(const ModelParams& m, const Profile& p, bool with_cells) {
  EnergyBreakdown e;
  const auto& u = p.u;
  const std::size_t n = p.cells();
  const double h = p.h();
  const double e2 = m.eps2();
  const double inv_e3 = 1.0 / (e2 * m.epsilon);
  const double inv_e = 1.0 / m.epsilon;
  if (with_cells) e.per_cell.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = h * m.flux.q_tilde(e2 * (u[i + 1] - u[i]) / h) * inv_e3;
    const double f =
        0.5 * h * (m.potential.value(u[i]) + m.potential.value(u[i + 1])) * inv_e;
    e.gradient_part += g;
    e.potential_part += f;
    if (with_cells) e.per_cell[i] = g + f;
  }
  e.total = e.gradient_part + e.potential_part;
  return e;
}

double energy_total(const ModelParams& m, const std::vector<double>& u, double h) {
  const double e2 = m.eps2();
  double grad = 0.0;
  double pot = 0.0;
  const std::size_t n = u.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    grad += m.flux.q_tilde(e2 * (u[i + 1] - u[i]) / h);
    pot += m.potential.value(u[i]);
  }
  pot += m.potential.value(u[n]);
  pot -= 0.5 * (m.potential.value(u[0]) + m.potential.value(u[n]));
  return h * grad / (e2 * m.epsilon) + h * pot / m.epsilon;
}

double c_eps(const ModelParams& m) {
  require_valid_epsilon(m);
  InversionContext ctx(m);
  const auto& pot = m.potential;
  // xc is the signed distance to the nearer endpoint, so F is evaluated
  // from the distance to the well without cancellation.
  auto f = [&](double x, double xc) {
    const double w = std::abs(xc);
    const double F = std::abs(x) < 0.5 ? pot.value(x) : pot.near_well(w);
    return m.flux.q(ctx.eps2() * j_eps(ctx, F));
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(f, -1.0, 1.0, 1e-14, &err);
  if (!std::isfinite(v) || err > 1e-10 * std::abs(v)) {
    throw QuadratureError("c_eps quadrature did not converge");
  }
  return v / m.epsilon;
}

double c0(const ModelParams& m) {
  const auto& pot = m.potential;
  auto f = [&](double x, double xc) {
    const double F = std::abs(x) < 0.5 ? pot.value(x) : pot.near_well(std::abs(xc));
    return std::sqrt(2.0 * F);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(f, -1.0, 1.0, 1e-14, &err);
  if (!std::isfinite(v) || err > 1e-10 * std::abs(v)) {
    throw QuadratureError("c0 quadrature did not converge");
  }
  return std::sqrt(m.flux.q_prime0()) * v;
}

double inequality_g(const InversionContext& ctx, double x, double y) {
  const double e2 = ctx.eps2();
  const auto& q = ctx.flux();
  return q.q_tilde(e2 * x) + e2 * y - e2 * std::abs(x) * q.q(e2 * j_eps(ctx, y));
}

InequalityReport verify_pointwise_inequality(const InversionContext& ctx,
                                             std::size_t samples) {
  if (samples < 2) throw DomainError("need at least two samples per axis");
  InequalityReport r;
  r.samples = samples;
  r.min_value = INFINITY;
  const double xm = ctx.s_max();
  const double ym = ctx.xi_max();
  const auto last = static_cast<double>(samples - 1);
  for (std::size_t j = 0; j < samples; ++j) {
    const double y = j + 1 == samples ? ym : ym * static_cast<double>(j) / last;
    for (std::size_t i = 0; i < samples; ++i) {
      const double x = i + 1 == samples ? xm : -xm + 2.0 * xm * static_cast<double>(i) / last;
      const double g = inequality_g(ctx, x, y);
      if (g < r.min_value) {
        r.min_value = g;
        r.argmin_x = x;
        r.argmin_y = y;
      }
    }
    const double on_curve = inequality_g(ctx, j_eps(ctx, y), y);
    r.max_abs_on_curve = std::max(r.max_abs_on_curve, std::abs(on_curve));
  }
  return r;
}

double l1_distance(const Profile& u, const Profile& w) {
  if (u.nodes() != w.nodes() || u.a != w.a || u.b != w.b) {
    throw DomainError("l1_distance: profiles live on different grids");
  }
  const double h = u.h();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < u.nodes(); ++i) {
    s += abs_linear(u.u[i] - w.u[i], u.u[i + 1] - w.u[i + 1], h);
  }
  return s;
}

double l1_distance(const Profile& u, const StepFunction& w) {
  if (u.a != w.a || u.b != w.b) throw DomainError("l1_distance: intervals differ");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < u.nodes(); ++i) {
    const double x0 = u.x(i);
    const double x1 = u.x(i + 1);
    const double u0 = u.u[i];
    const double slope = (u.u[i + 1] - u0) / (x1 - x0);
    // Sub-cells between the jumps that fall inside (x0, x1).
    double lo = x0;
    auto it = std::upper_bound(w.jumps.begin(), w.jumps.end(), x0);
    while (lo < x1) {
      const double hi = (it != w.jumps.end() && *it < x1) ? *it : x1;
      const double c = w(0.5 * (lo + hi));
      s += abs_linear(u0 + slope * (lo - x0) - c, u0 + slope * (hi - x0) - c, hi - lo);
      lo = hi;
      if (it != w.jumps.end() && *it <= lo) ++it;
    }
  }
  return s;
}

}  // namespace pmlab
