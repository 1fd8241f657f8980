#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/evolution.hpp"
#include "pmlab/fit.hpp"
#include "pmlab/harness.hpp"
#include "pmlab/layers.hpp"
#include "pmlab/stationary.hpp"

using namespace pmlab;

namespace {

ModelParams model(double eps, double theta, double a, double b) {
  return make_model(eps, a, b, FluxSpec::rational(), PotentialSpec::double_well(theta));
}

Profile ramp(double a, double b, std::size_t n, double lo, double hi) {
  Profile p;
  p.a = a;
  p.b = b;
  p.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.u[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return p;
}

// Interface points come in (lo, hi) pairs; segments closer than gap merge.
std::size_t clusters(const std::vector<double>& pts, double gap) {
  if (pts.empty()) return 0;
  std::size_t c = 1;
  for (std::size_t i = 2; i + 1 < pts.size(); i += 2) c += pts[i] - pts[i - 1] > gap;
  return c;
}

DiagnosticsRecord rec(double t, std::size_t n) {
  DiagnosticsRecord r;
  r.t = t;
  r.n_zeros = n;
  return r;
}

// Slope of ln t against x by least squares.
double slope(const std::vector<double>& x, const std::vector<double>& t) {
  std::vector<double> y;
  for (double v : t) y.push_back(std::log(v));
  return fit_line(x, y).slope;
}

}  // namespace

TEST_CASE("zeros of simple profiles") {
  CHECK(zeros_of(ramp(0, 1, 11, 1, 1)).empty());
  const auto z = zeros_of(ramp(0, 1, 10, -1, 1));
  REQUIRE(z.size() == 1);
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-15));
  // An exact zero at a node is reported once.
  const auto e = zeros_of(ramp(0, 1, 11, -1, 1));
  REQUIRE(e.size() == 1);
  CHECK(e[0] == doctest::Approx(0.5).epsilon(1e-15));
  // Touching zero without a sign change is not a crossing.
  Profile t = ramp(0, 1, 5, 1, 1);
  t.u[2] = 0.0;
  CHECK(zeros_of(t).empty());
}

TEST_CASE("zeros of the six-layer compacton") {
  const auto m = model(0.1, 1.5, -4, 4);
  const std::vector<double> h = {-3.4, -2.0, 0.0, 0.9, 2.2, 3.2};
  const auto p = compacton(m, h, -1.0, 2049);
  const auto z = zeros_of(p);
  REQUIRE(z.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(z[i] - h[i]) <= p.h());
}

TEST_CASE("zeros recovered on random compacton configurations") {
  const auto m = model(0.1, 1.5, -4, 4);
  const double x1 = *StandingWave(m).report().x1;
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = count(rng);
    // Spread n layers with gaps above 2 x1 and room at both ends.
    const double need = 2 * x1 * 1.05;
    const double slack = (m.b - m.a) - need * (n + 1);
    REQUIRE(slack > 0.0);
    std::vector<double> cut;
    for (int k = 0; k < n; ++k) cut.push_back(unit(rng) * slack);
    std::sort(cut.begin(), cut.end());
    std::vector<double> h;
    for (int k = 0; k < n; ++k) h.push_back(m.a + need * (k + 1) + cut[k]);
    const double start = unit(rng) < 0.5 ? -1.0 : 1.0;
    const auto p = compacton(m, h, start, 2049);
    const auto z = zeros_of(p);
    REQUIRE(z.size() == h.size());
    for (std::size_t k = 0; k < h.size(); ++k) CHECK(std::abs(z[k] - h[k]) <= p.h());
  }
}

TEST_CASE("interface of a tanh layer and of a well state") {
  const double eps = 0.05;
  Profile p;
  p.a = -1;
  p.b = 1;
  p.u.resize(801);
  const double h0 = 0.137;
  for (std::size_t i = 0; i < p.u.size(); ++i) {
    p.u[i] = std::tanh((p.x(i) - h0) / (std::sqrt(2.0) * eps));
  }
  const auto k = interface(p);
  REQUIRE(k.size() == 2);
  CHECK(std::abs(0.5 * (k[0] + k[1]) - h0) <= p.h());
  // tanh^-1(0.9) sqrt(2) eps on each side.
  CHECK(k[1] - k[0] == doctest::Approx(2 * std::atanh(0.9) * std::sqrt(2.0) * eps).epsilon(1e-3));
  CHECK(interface(ramp(-1, 1, 11, 1, 1)).empty());
}

TEST_CASE("interface of a layered datum has one cluster per layer") {
  const auto m = model(0.1, 2.0, -4, 4);
  const std::vector<double> h = {-3.4, -2.0, 0.0, 0.9, 2.2, 3.2};
  const auto p = transition_layer_datum(m, h, 2049);
  const double r = 0.4;
  const auto k = interface(p);
  CHECK(clusters(k, r) == h.size());
  CHECK(k.front() >= m.a);
  CHECK(k.back() <= m.b);
  CHECK(std::is_sorted(k.begin(), k.end()));
  // A narrower K still sees every layer.
  const auto k2 = interface(p, ClosedSet{{{-0.5, 0.5}}});
  CHECK(clusters(k2, r) == h.size());
}

TEST_CASE("closed set membership") {
  const ClosedSet k{{{-0.9, -0.5}, {0.2, 0.3}}};
  CHECK(k.contains(-0.9));
  CHECK(k.contains(-0.7));
  CHECK(k.contains(0.3));
  CHECK(!k.contains(0.0));
  CHECK(!k.contains(0.31));
}

TEST_CASE("Hausdorff distance examples") {
  CHECK(hausdorff({0.0, 1.0, 2.5}, {0.0, 1.0, 2.5}) == 0.0);
  CHECK(hausdorff({0.0}, {1.0}) == 1.0);
  CHECK(hausdorff({0.0, 10.0}, {1.0}) == 9.0);
  CHECK(hausdorff({1.0}, {0.0, 10.0}) == 9.0);
  CHECK_THROWS_AS(hausdorff({}, {1.0}), EmptySetError);
  CHECK_THROWS_AS(hausdorff({1.0}, {}), EmptySetError);
}

TEST_CASE("Hausdorff distance is a metric on finite sets") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  auto draw = [&]() {
    std::vector<double> v(size(rng));
    for (double& x : v) x = pos(rng);
    std::sort(v.begin(), v.end());
    return v;
  };
  // Brute force over all pairs.
  auto oracle = [](const std::vector<double>& a, const std::vector<double>& b) {
    auto side = [](const std::vector<double>& p, const std::vector<double>& q) {
      double s = 0.0;
      for (double x : p) {
        double d = std::numeric_limits<double>::infinity();
        for (double y : q) d = std::min(d, std::abs(x - y));
        s = std::max(s, d);
      }
      return s;
    };
    return std::max(side(a, b), side(b, a));
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = draw(), b = draw(), c = draw();
    const double ab = hausdorff(a, b);
    CHECK(ab == oracle(a, b));
    CHECK(ab == hausdorff(b, a));
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(ab >= 0.0);
    CHECK(hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-12);
  }
}

TEST_CASE("step function geometry") {
  const auto s = make_step_function(-4, 4, {-1.0, 1.0}, -1.0, 0.5);
  CHECK(s.v(-2.0) == -1.0);
  CHECK(s.v(0.0) == 1.0);
  CHECK(s.v(3.0) == -1.0);
  CHECK(s.r == 0.5);
  CHECK_THROWS_AS(make_step_function(-4, 4, {-1.0, -0.2}, -1.0, 0.5), GeometryError);
  CHECK_THROWS_AS(make_step_function(-4, 4, {-3.8}, -1.0, 0.5), GeometryError);
  CHECK_THROWS_AS(make_step_function(-4, 4, {3.6}, -1.0, 0.5), GeometryError);
  CHECK_NOTHROW(make_step_function(-4, 4, {-3.5, 3.5}, 1.0, 0.5));
}

TEST_CASE("collapse events from records") {
  const std::vector<DiagnosticsRecord> r = {rec(0, 6), rec(1, 6), rec(2, 4), rec(3, 4),
                                            rec(5, 2), rec(8, 2), rec(9, 0)};
  const auto ev = collapse_times(r);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].t == 2.0);
  CHECK(ev[0].t_lo == 1.0);
  CHECK(ev[0].zeros_before == 6);
  CHECK(ev[0].zeros_after == 4);
  CHECK(ev[1].t == 5.0);
  CHECK(ev[2].zeros_after == 0);
  CHECK(collapse_times(std::vector<DiagnosticsRecord>{rec(0, 2), rec(1, 2)}).empty());
}

TEST_CASE("a compacton run has no collapse events") {
  const auto m = model(0.1, 1.5, -4, 4);
  const auto u0 = compacton(m, {-2.0, 0.0, 2.0}, -1.0, 1025);
  StepperConfig cfg;
  const auto r = evolve(m, cfg, u0, 1e4, geometric_checkpoints(0.1, 1e4));
  CHECK(collapse_times(m, cfg, r).empty());
}

TEST_CASE("first collapse of the six-layer experiment") {
  const auto p = builtin_preset("exp1");
  const auto m = model_of(p);
  EvolveOptions opts;
  opts.observer = [](const State&, const DiagnosticsRecord& d) { return d.n_zeros < 6; };
  const auto r = evolve(m, p.stepper, initial_datum(p, m), p.horizon,
                        geometric_checkpoints(0.1, p.horizon), opts);
  const auto ev = collapse_times(m, p.stepper, r);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].zeros_before == 6);
  CHECK(ev[0].zeros_after == 4);
  CHECK(ev[0].t_lo < ev[0].t);
  CHECK(ev[0].t - ev[0].t_lo <= 0.01 * ev[0].t);
  // The closest pair (0 and 0.9) is the one that goes.
  REQUIRE(ev[0].positions.size() == 4);
  CHECK(ev[0].positions[1] < -1.0);
  CHECK(ev[0].positions[2] > 1.5);
}

TEST_CASE("collapse times increase through a run") {
  const auto p = builtin_preset("exp2-fast");
  const auto m = model_of(p);
  const auto r = evolve(m, p.stepper, initial_datum(p, m), p.horizon,
                        geometric_checkpoints(0.1, p.horizon));
  const auto ev = collapse_times(m, p.stepper, r);
  REQUIRE(ev.size() >= 2);
  for (std::size_t i = 1; i < ev.size(); ++i) {
    CHECK(ev[i].t > ev[i - 1].t);
    CHECK(ev[i].zeros_before == ev[i - 1].zeros_after);
  }
}

TEST_CASE("exit time sentinel") {
  const auto m = model(0.1, 2.0, -2, 2);
  const auto u0 = transition_layer_datum(m, {-0.5, 0.5}, 513);
  const double t = t_eps_exit(m, StepperConfig{}, u0, 5.0, default_interface_set(), 1e3);
  CHECK(std::isinf(t));
  CHECK(t > 0.0);
}

TEST_CASE("exponential slow motion at theta = 2") {
  // A from the collapse-time law of the two-layer family, then the exit time
  // must grow by at least exp(A (1/0.08 - 1/0.1) / 2).
  const auto law = timing_law(builtin_family("law-eps2"));
  const double A = law.fit.slope;
  CHECK(A > 0.0);
  auto exit_at = [](double eps) {
    const auto m = model(eps, 2.0, -2, 2);
    const auto u0 = transition_layer_datum(m, {-0.4, 0.4}, 1025);
    return t_eps_exit(m, StepperConfig{}, u0, 0.1, default_interface_set(), 1e9);
  };
  const double t10 = exit_at(0.1), t08 = exit_at(0.08);
  CHECK(std::isfinite(t08));
  CHECK(t08 / t10 >= std::exp(A * (1 / 0.08 - 1 / 0.1) * 0.5));
}

TEST_CASE("algebraic slow motion at theta = 4") {
  // Tails 1 - |Phi| ~ (eps/x)^(2/(theta-2)) give an interaction energy
  // ~ eps^beta L^-beta, speed ~ eps^(beta+2) L^-(beta+1) and hence exit and
  // collapse times ~ eps^-(beta+2). The lower bound eps^-beta must hold too.
  const double beta = k_sequence(4.0, 1).beta;
  std::vector<double> x, t;
  for (double eps : {0.12, 0.1, 0.08}) {
    const auto m = model(eps, 4.0, -2, 2);
    const auto u0 = transition_layer_datum(m, {-0.5, 0.5}, 1025);
    const double te = t_eps_exit(m, StepperConfig{}, u0, 0.1, ClosedSet{{{-0.5, 0.5}}}, 1e9);
    REQUIRE(std::isfinite(te));
    x.push_back(std::log(1 / eps));
    t.push_back(te);
  }
  CHECK(t[0] < t[1]);
  CHECK(t[1] < t[2]);
  const double s = slope(x, t);
  CHECK(s >= 1.0);
  CHECK(s == doctest::Approx(beta + 2).epsilon(0.15));
}

TEST_CASE("distance to the step function shrinks with eps over exp(A/eps)") {
  const double A = 0.6;
  std::vector<double> sup;
  for (double eps : {0.12, 0.1, 0.08}) {
    const auto m = model(eps, 2.0, -2, 2);
    const auto u0 = transition_layer_datum(m, {-0.5, 0.5}, 1025);
    const StepFunction v{-2, 2, {-0.5, 0.5}, -1.0};
    double worst = l1_distance(u0, v);
    EvolveOptions opts;
    opts.observer = [&](const State& s, const DiagnosticsRecord&) {
      worst = std::max(worst, l1_distance(s.u, v));
      return false;
    };
    const double horizon = std::exp(A / eps);
    const auto r = evolve(m, StepperConfig{}, u0, horizon,
                          geometric_checkpoints(0.1, horizon), opts);
    CHECK(r.final_state.t == horizon);
    sup.push_back(worst);
  }
  CHECK(sup[1] < sup[0]);
  CHECK(sup[2] < sup[1]);
}
