#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/inversion.hpp"
#include "pmlab/stationary.hpp"

using namespace pmlab;

namespace {

ModelParams model(double eps, double theta, double a = -1.0, double b = 1.0,
                  FluxSpec f = FluxSpec::rational()) {
  return make_model(eps, a, b, f, PotentialSpec::double_well(theta));
}

Profile sampled(double a, double b, std::size_t n, double (*f)(double)) {
  Profile p;
  p.a = a;
  p.b = b;
  p.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.u[i] = f(p.x(i));
  return p;
}

// Independent rational-flux pieces for the oracles below.
double q_rat(double z) { return z / (1 + z * z); }
double qt_rat(double z) { return 0.5 * std::log1p(z * z); }

// J_eps for the rational flux by bisection on P(s) = s Q(e2 s) - Q~(e2 s)/e2.
double j_rat(double eps, double xi) {
  const double e2 = eps * eps;
  auto p = [&](double s) { return s * q_rat(e2 * s) - qt_rat(e2 * s) / e2; };
  double lo = 0.0, hi = 1.0 / e2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (p(mid) < xi ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("energy of the constant well state is zero") {
  const auto m = model(0.1, 2.0);
  Profile p;
  p.a = -1;
  p.b = 1;
  p.u.assign(101, 1.0);
  const auto e = energy(m, p, true);
  CHECK(e.total == 0.0);
  CHECK(e.gradient_part == 0.0);
  CHECK(e.potential_part == 0.0);
}

TEST_CASE("energy of u = x against closed forms") {
  const double eps = 0.1;
  const auto m = model(eps, 2.0);
  const auto p = sampled(-1, 1, 4001, [](double x) { return x; });
  const auto e = energy(m, p);
  // Constant slope 1: the gradient term is exact.
  CHECK(e.gradient_part == doctest::Approx(2 * qt_rat(eps * eps) / (eps * eps * eps)).epsilon(1e-12));
  // int_{-1}^{1} (1 - x^2)^2 / 4 dx = 4/15; trapezoid error is O(h^2).
  CHECK(e.potential_part == doctest::Approx(4.0 / 15.0 / eps).epsilon(1e-6));
  CHECK(e.total == e.gradient_part + e.potential_part);
  CHECK(energy_total(m, p.u, p.h()) == doctest::Approx(e.total).epsilon(1e-13));
}

TEST_CASE("per-cell energies add up and parts are nonnegative") {
  std::mt19937 rng(7);
  const auto m = model(0.1, 2.0);
  const double kappa = m.flux.kappa();
  for (int trial = 0; trial < 20; ++trial) {
    Profile p;
    p.a = -1;
    p.b = 1;
    p.u.resize(513);
    const double h = p.h();
    // Random walk with eps^2 |du/h| <= kappa on every cell.
    std::uniform_real_distribution<double> step(-kappa * h / m.eps2(), kappa * h / m.eps2());
    p.u[0] = std::uniform_real_distribution<double>(-1.2, 1.2)(rng);
    for (std::size_t i = 1; i < p.u.size(); ++i) p.u[i] = p.u[i - 1] + step(rng);
    const auto e = energy(m, p, true);
    REQUIRE(e.per_cell.size() == p.cells());
    const double sum = std::accumulate(e.per_cell.begin(), e.per_cell.end(), 0.0);
    CHECK(sum == doctest::Approx(e.total).epsilon(1e-13));
    CHECK(e.total == e.gradient_part + e.potential_part);
    CHECK(e.gradient_part >= 0.0);
    CHECK(e.potential_part >= 0.0);
  }
}

TEST_CASE("c0 closed forms") {
  // theta = 2: sqrt(2F) = (1 - u^2) / sqrt(2), integral 4/3.
  CHECK(c0(model(0.1, 2.0)) == doctest::Approx(2 * std::sqrt(2.0) / 3).epsilon(1e-10));
  // theta = 4: sqrt(2F) = (1 - u^2)^2 / 2, integral 8/15; also a 1e6-point
  // midpoint sum.
  const int n = 1000000;
  double riemann = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = -1 + (i + 0.5) * 2.0 / n;
    riemann += std::sqrt(2 * std::pow(1 - u * u, 4.0) / 8);
  }
  riemann *= 2.0 / n;
  const double c4 = c0(model(0.1, 4.0));
  CHECK(c4 == doctest::Approx(8.0 / 15.0).epsilon(1e-10));
  CHECK(c4 == doctest::Approx(riemann).epsilon(1e-9));
  // Scaled flux: Q'(0) = alpha.
  const auto scaled = model(0.1, 2.0, -1, 1, FluxSpec::rational(4.0));
  CHECK(c0(scaled) == doctest::Approx(2 * c0(model(0.1, 2.0))).epsilon(1e-12));
}

TEST_CASE("c_eps against an independent quadrature") {
  const double eps = 0.1;
  const auto m = model(eps, 2.0);
  // Simpson on eps^-1 int Q(eps^2 J(F(s))) ds with the bisection J above.
  const int n = 4000;
  const double h = 2.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = -1 + i * h;
    const double F = 0.25 * (1 - u * u) * (1 - u * u);
    const double v = q_rat(eps * eps * j_rat(eps, F));
    s += v * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  const double oracle = s * h / 3 / eps;
  CHECK(c_eps(m) == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(c_eps(m) > 0.0);
}

TEST_CASE("c_eps tends to c0 and scales with sqrt(alpha)") {
  const auto m = model(0.01, 2.0);
  CHECK(std::abs(c_eps(m) - c0(m)) < 1e-2 * c0(m));
  // The gap shrinks with eps.
  CHECK(std::abs(c_eps(model(0.05, 2.0)) - c0(m)) > std::abs(c_eps(m) - c0(m)));
  const auto m4 = model(0.01, 2.0, -1, 1, FluxSpec::rational(4.0));
  CHECK(c_eps(m4) == doctest::Approx(2 * c_eps(m)).epsilon(0.02));
}

TEST_CASE("c_eps rejects eps at or beyond eps0") {
  auto m = model(0.1, 2.0);
  m.epsilon = eps0_of(m.flux, m.potential);
  CHECK_THROWS_AS(c_eps(m), DomainError);
}

TEST_CASE("pointwise inequality holds on the grid and vanishes on the curve") {
  for (auto flux : {FluxSpec::rational(), FluxSpec::gaussian()}) {
    for (double eps : {0.1, 0.5}) {
      const InversionContext ctx(eps, flux);
      const auto r = verify_pointwise_inequality(ctx, 200);
      CHECK(r.samples == 200);
      CHECK(r.min_value >= -1e-10);
      CHECK(r.max_abs_on_curve <= 1e-10);
      CHECK(std::abs(inequality_g(ctx, 0.0, 0.0)) <= 1e-15);
      CHECK(std::abs(inequality_g(ctx, ctx.s_max(), ctx.xi_max())) <= 1e-10);
    }
  }
}

TEST_CASE("inequality function matches a direct evaluation") {
  const double eps = 0.5;
  const InversionContext ctx(eps, FluxSpec::rational());
  const double e2 = eps * eps;
  for (double x : {-3.9, -1.0, 0.3, 2.0, 3.99}) {
    for (double y : {0.0, 0.05, 0.3, 0.6}) {
      const double direct = qt_rat(e2 * x) + e2 * y - e2 * std::abs(x) * q_rat(e2 * j_rat(eps, y));
      CHECK(inequality_g(ctx, x, y) == doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("L1 distance examples") {
  const auto a = sampled(0, 1, 1001, [](double x) { return std::sin(3 * x); });
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l1_distance(a, StepFunction{0, 1, {}, 1.0}) ==
        doctest::Approx(1.0 - (1 - std::cos(3.0)) / 3).epsilon(1e-5));

  const auto one = sampled(0, 1, 101, [](double) { return 1.0; });
  CHECK(l1_distance(one, StepFunction{0, 1, {0.5}, -1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  // Jump inside a cell is split exactly.
  CHECK(l1_distance(one, StepFunction{0, 1, {0.503}, -1.0}) ==
        doctest::Approx(1.006).epsilon(1e-14));

  // Sign change of u - w inside a cell: |2x| is integrated exactly.
  const auto up = sampled(-1, 1, 100, [](double x) { return x; });
  const auto down = sampled(-1, 1, 100, [](double x) { return -x; });
  CHECK(l1_distance(up, down) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("tanh layer against the step function") {
  const double eps = 0.02;
  const double k = 1.0 / (std::sqrt(2.0) * eps);
  Profile p;
  p.a = -1;
  p.b = 1;
  p.u.resize(40001);
  for (std::size_t i = 0; i < p.u.size(); ++i) p.u[i] = std::tanh(k * p.x(i));
  const StepFunction v{-1, 1, {0.0}, -1.0};
  const double closed = 2 * eps * std::sqrt(2.0) * std::log(2.0);
  CHECK(l1_distance(p, v) == doctest::Approx(closed).epsilon(1e-6));

  // The glued standing wave at theta = 2 matches to leading order.
  const auto m = model(eps, 2.0);
  const auto w = transition_layer_datum(m, {0.0}, 40001);
  CHECK(l1_distance(w, v) == doctest::Approx(closed).epsilon(0.05));
}

TEST_CASE("transition datum energy deficit decays exponentially in 1/eps") {
  // Layers at +-r with r = 0.2 on [-1, 1]; oracle rate A = 0.9 r sqrt(2 F''(1) / Q'(0)).
  const double r = 0.2;
  const double A = 0.9 * r * std::sqrt(2.0 * 2.0 / 1.0);
  std::vector<double> inv_eps, log_gap;
  for (double eps : {0.08, 0.06, 0.04}) {
    const auto m = model(eps, 2.0);
    // Richardson on two grids removes the O(h^2) quadrature error.
    const double e1 = energy(m, transition_layer_datum(m, {-r, r}, 32769)).total;
    const double e2 = energy(m, transition_layer_datum(m, {-r, r}, 65537)).total;
    const double e = (4 * e2 - e1) / 3;
    const double gap = 2 * c_eps(m) - e;
    REQUIRE(gap > 0.0);
    inv_eps.push_back(1 / eps);
    log_gap.push_back(std::log(gap));
  }
  for (std::size_t i = 0; i + 1 < inv_eps.size(); ++i) {
    const double slope = (log_gap[i + 1] - log_gap[i]) / (inv_eps[i + 1] - inv_eps[i]);
    CHECK(slope <= -A);
  }
}
