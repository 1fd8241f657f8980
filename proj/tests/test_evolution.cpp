#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/evolution.hpp"
#include "pmlab/harness.hpp"
#include "pmlab/layers.hpp"
#include "pmlab/stationary.hpp"

using namespace pmlab;

namespace {

ModelParams model(double eps, double theta, double a, double b) {
  return make_model(eps, a, b, FluxSpec::rational(), PotentialSpec::double_well(theta));
}

Profile constant(double a, double b, std::size_t n, double c) {
  Profile p;
  p.a = a;
  p.b = b;
  p.u.assign(n, c);
  return p;
}

// Half weights at the boundary nodes.
double weighted_sum(const std::vector<double>& v, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i == 0 || i + 1 == v.size() ? 0.5 : 1.0) * h * v[i];
  }
  return s;
}

StepperConfig explicit_cfg() {
  StepperConfig c;
  c.scheme = Scheme::explicit_adaptive;
  c.dt_max = 1.0;
  return c;
}

}  // namespace

TEST_CASE("rhs of constant states") {
  const auto m = model(0.1, 2.0, -1, 1);
  for (double c : {-1.0, 0.0, 1.0}) {
    for (double v : rhs(m, constant(-1, 1, 65, c).u, 2.0 / 64)) CHECK(v == 0.0);
  }
  for (double c : {0.5, -0.3, 1.2}) {
    for (double v : rhs(m, constant(-1, 1, 65, c).u, 2.0 / 64)) {
      CHECK(v == -m.potential.derivative(c));
    }
  }
}

TEST_CASE("flux differences telescope in the weighted sum") {
  const auto m = model(0.1, 2.0, -4, 4);
  const auto p = transition_layer_datum(m, {-3.4, -2.0, 0.0, 0.9, 2.2, 3.2}, 513);
  const auto f = rhs(m, p.u, p.h());
  std::vector<double> fp(p.nodes());
  for (std::size_t i = 0; i < fp.size(); ++i) fp[i] = -m.potential.derivative(p.u[i]);
  double scale = 0.0;
  for (double v : fp) scale += std::abs(v) * p.h();
  CHECK(std::abs(weighted_sum(f, p.h()) - weighted_sum(fp, p.h())) <= 1e-13 * scale);
}

TEST_CASE("unstable equilibrium u = 0 does not move") {
  const auto m = model(0.1, 2.0, -1, 1);
  for (auto cfg : {StepperConfig{}, explicit_cfg()}) {
    auto s = initial_state(cfg, constant(-1, 1, 129, 0.0));
    for (int k = 0; k < 50; ++k) step(m, cfg, s);
    CHECK(s.t > 0.0);
    for (double v : s.u.u) CHECK(v == 0.0);
  }
}

TEST_CASE("the well state exits immediately as converged") {
  const auto m = model(0.1, 2.0, -1, 1);
  const auto r = evolve(m, StepperConfig{}, constant(-1, 1, 129, 1.0), 1e6,
                        geometric_checkpoints(0.1, 1e6));
  CHECK(r.stop_reason == "converged");
  CHECK(r.final_state.t == 0.0);
}

TEST_CASE("geometric checkpoints") {
  const auto c = geometric_checkpoints(0.1, 100.0, 1.5);
  REQUIRE(c.size() >= 2);
  CHECK(c.front() == 0.1);
  CHECK(c.back() == 100.0);
  for (std::size_t i = 1; i + 1 < c.size(); ++i) {
    CHECK(c[i] == doctest::Approx(1.5 * c[i - 1]).epsilon(1e-14));
  }
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
}

TEST_CASE("stepper config validation") {
  StepperConfig c;
  c.dt_min = 1.0;
  c.dt_init = 0.1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  StepperConfig d;
  d.dt_max = 1e-6;
  CHECK_THROWS_AS(d.validate(), DomainError);
  CHECK_NOTHROW(StepperConfig{}.validate());
}

TEST_CASE("explicit step respects the stability limit") {
  const auto m = model(0.1, 2.0, -4, 4);
  const auto cfg = explicit_cfg();
  const auto p = transition_layer_datum(m, {-1.0, 1.0}, 1025);
  auto s = initial_state(cfg, p);
  for (int k = 0; k < 20; ++k) step(m, cfg, s);
  const double h = p.h();
  // Q' <= Q'(0) = 1 for the rational flux and |F''| <= 2 on [-1, 1].
  const double limit = std::min(0.4 * h * h / m.eps2(), 0.4 / 2.0);
  CHECK(s.stats.last_dt <= limit * (1 + 1e-12));
}

TEST_CASE("a too large dt_min is reported as stiffness") {
  const auto m = model(0.1, 2.0, -4, 4);
  auto cfg = explicit_cfg();
  cfg.dt_min = 0.5;
  cfg.dt_init = 0.5;
  auto s = initial_state(cfg, transition_layer_datum(m, {0.0}, 1025));
  CHECK_THROWS_AS(step(m, cfg, s), StiffnessError);
}

TEST_CASE("backward regime policies") {
  const auto m = model(0.2, 2.0, -1, 1);
  // A jump of 2 across one cell: eps^2 |du/h| = 0.04 * 2 * 32 = 2.56 > kappa.
  auto p = constant(-1, 1, 65, -1.0);
  for (std::size_t i = 33; i < p.u.size(); ++i) p.u[i] = 1.0;
  CHECK(max_gradient(m, p.u, p.h()) > m.flux.kappa());

  StepperConfig strict;
  strict.backward_policy = BackwardPolicy::error;
  auto s = initial_state(strict, p);
  CHECK_THROWS_AS(step(m, strict, s), BackwardRegimeError);

  StepperConfig warn;
  auto w = initial_state(warn, p);
  step(m, warn, w);
  CHECK(w.stats.backward_steps == 1);
  CHECK(w.stats.first_backward_time == w.t);

  // Clamping cuts the flux argument at kappa: the jump cell carries Q(kappa) = 1/2.
  const auto f = rhs(m, p.u, p.h(), BackwardPolicy::clamp);
  CHECK(f[32] == doctest::Approx(0.5 / p.h()).epsilon(1e-14));
  CHECK(f[33] == doctest::Approx(-0.5 / p.h()).epsilon(1e-14));
}

TEST_CASE("energy decreases and the dissipation identity holds") {
  // Perturbation datum of the third experiment, explicit scheme, T = 10.
  auto p = builtin_preset("exp3");
  p.cells = 1024;
  const auto m = model_of(p);
  const auto u0 = initial_datum(p, m);
  // Largest per-interval defect |dE + dD| / dD.
  auto run = [&](double safety) {
    auto cfg = explicit_cfg();
    cfg.explicit_safety = safety;
    const auto r = evolve(m, cfg, u0, 10.0, geometric_checkpoints(0.1, 10.0));
    REQUIRE(r.records.size() > 10);
    const double e_drop = r.records.front().energy - r.records.back().energy;
    CHECK(e_drop > 0.0);
    CHECK(std::abs(e_drop - r.records.back().dissipated) <= 1e-3 * e_drop);
    double worst = 0.0;
    for (std::size_t k = 1; k < r.records.size(); ++k) {
      const auto& a = r.records[k - 1];
      const auto& b = r.records[k];
      CHECK(b.energy <= a.energy + cfg.energy_drift_tol);
      const double dt = b.t - a.t;
      const double de = b.energy - a.energy;
      const double dd = b.dissipated - a.dissipated;
      CHECK(std::abs(de + dd) / dt <= 1e-3 * (1 + b.ut_l2sq));
      worst = std::max(worst, std::abs(de + dd) / dd);
    }
    return worst;
  };
  // The remaining defect is time discretization error and shrinks with dt.
  const double coarse = run(0.4);
  const double fine = run(0.1);
  CHECK(coarse < 1e-3);
  CHECK(coarse / fine > 4.0);
}

TEST_CASE("explicit and implicit schemes agree at T = 10") {
  auto p = builtin_preset("exp1");
  p.cells = 1024;
  const auto m = model_of(p);
  const auto u0 = initial_datum(p, m);
  StepperConfig imp;
  imp.dt_max_active = 0.05;
  const auto a = evolve(m, explicit_cfg(), u0, 10.0, {10.0}).final_state;
  const auto b = evolve(m, imp, u0, 10.0, {10.0}).final_state;
  CHECK(a.t == 10.0);
  CHECK(b.t == 10.0);
  double na = 0.0, nb = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.u.nodes(); ++i) {
    na += a.u.u[i] * a.u.u[i];
    nb += b.u.u[i] * b.u.u[i];
    diff = std::max(diff, std::abs(a.u.u[i] - b.u.u[i]));
  }
  na = std::sqrt(na * a.u.h());
  nb = std::sqrt(nb * b.u.h());
  CHECK(std::abs(na - nb) <= 1e-3 * na);
  CHECK(diff < 1e-2);
}

TEST_CASE("two layers annihilate; values stay in [-1, 1]") {
  const auto m = model(0.1, 2.0, -2, 2);
  const auto u0 = transition_layer_datum(m, {-0.4, 0.4}, 1025);
  double worst = 0.0;
  EvolveOptions opts;
  opts.observer = [&](const State& s, const DiagnosticsRecord&) {
    for (double v : s.u.u) worst = std::max(worst, std::abs(v) - 1.0);
    return false;
  };
  const auto r = evolve(m, StepperConfig{}, u0, 1e6, geometric_checkpoints(0.1, 1e6), opts);
  CHECK(r.stop_reason == "converged");
  CHECK(worst <= 1e-8);
  std::size_t last = 2;
  for (const auto& rec : r.records) {
    CHECK((rec.n_zeros == 2 || rec.n_zeros == 0));
    CHECK(rec.n_zeros <= last);
    last = rec.n_zeros;
  }
  CHECK(last == 0);
  for (std::size_t k = 1; k < r.records.size(); ++k) {
    CHECK(r.records[k].energy <= r.records[k - 1].energy + 1e-10);
  }
}

TEST_CASE("a compacton stays put") {
  const auto m = model(0.1, 1.5, -4, 4);
  const auto u0 = compacton(m, {0.0}, -1.0, 2049);
  const auto r = evolve(m, StepperConfig{}, u0, 1e4, geometric_checkpoints(0.1, 1e4));
  CHECK(r.final_state.t == 1e4);
  CHECK(l1_distance(r.final_state.u, u0) < 1e-4);
}

TEST_CASE("first collapse time is grid-converged") {
  auto p = builtin_preset("exp1");
  const auto m = model_of(p);
  auto first = [&](std::size_t cells) {
    p.cells = cells;
    const auto u0 = initial_datum(p, m);
    EvolveOptions opts;
    opts.observer = [](const State&, const DiagnosticsRecord& d) { return d.n_zeros < 6; };
    const auto r = evolve(m, p.stepper, u0, p.horizon, geometric_checkpoints(0.1, p.horizon),
                          opts);
    const auto ev = collapse_times(m, p.stepper, r);
    REQUIRE(!ev.empty());
    CHECK(ev.front().zeros_before == 6);
    return ev.front().t;
  };
  const double t1 = first(2048);
  const double t2 = first(4096);
  CHECK(std::abs(t1 - t2) < 0.1 * t2);
}
