#include "pmlab/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/layers.hpp"

namespace pmlab {

const char* scheme_name(Scheme s) {
  return s == Scheme::explicit_adaptive ? "explicit" : "implicit";
}

const char* policy_name(BackwardPolicy p) {
  switch (p) {
    case BackwardPolicy::error:
      return "error";
    case BackwardPolicy::warn:
      return "warn";
    case BackwardPolicy::clamp:
      return "clamp";
  }
  return "?";
}

void StepperConfig::validate() const {
  if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max)) {
    throw DomainError("stepper requires 0 < dt_min <= dt_init <= dt_max");
  }
  if (!(dt_max_active > 0.0)) throw DomainError("dt_max_active must be positive");
  if (!(newton_tol > 0.0) || newton_max_iter < 1) {
    throw DomainError("newton_tol must be positive and newton_max_iter >= 1");
  }
  if (!(energy_drift_tol >= 0.0)) throw DomainError("energy_drift_tol must be >= 0");
  if (!(max_du > 0.0)) throw DomainError("max_du must be positive");
  if (!(explicit_safety > 0.0 && explicit_safety <= 0.5)) {
    throw DomainError("explicit_safety must lie in (0, 0.5]");
  }
  if (!(growth >= 1.0) || grow_after < 1) throw DomainError("invalid dt growth settings");
}

namespace {

inline double weight(std::size_t i, std::size_t n_nodes) {
  return (i == 0 || i + 1 == n_nodes) ? 0.5 : 1.0;
}

inline double flux_arg(const ModelParams& m, double a, BackwardPolicy policy) {
  if (policy != BackwardPolicy::clamp) return a;
  const double k = m.flux.kappa();
  return std::clamp(a, -k, k);
}

// Interface fluxes Q(eps^2 D_{i+1/2}), i = 0..n-2, and optionally their
// derivatives with respect to D (times eps^2 / h).
void interface_fluxes(const ModelParams& m, const std::vector<double>& u, double h,
                      BackwardPolicy policy, std::vector<double>& q,
                      std::vector<double>* dq) {
  const std::size_t n = u.size();
  const double c = m.eps2() / h;
  const double k = m.flux.kappa();
  q.resize(n - 1);
  if (dq) dq->resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = c * (u[i + 1] - u[i]);
    const double z = flux_arg(m, a, policy);
    q[i] = m.flux.q(z);
    if (dq) {
      const bool cut = policy == BackwardPolicy::clamp && std::abs(a) > k;
      (*dq)[i] = cut ? 0.0 : m.flux.q_prime(z) * c;
    }
  }
}

void rhs_into(const ModelParams& m, const std::vector<double>& u, double h,
              BackwardPolicy policy, std::vector<double>& q, std::vector<double>& out) {
  const std::size_t n = u.size();
  interface_fluxes(m, u, h, policy, q, nullptr);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 < n ? q[i] : 0.0;
    const double left = i > 0 ? q[i - 1] : 0.0;
    out[i] = (right - left) / (weight(i, n) * h) - m.potential.derivative(u[i]);
  }
}

// Solves the tridiagonal system (lower, diag, upper) x = r in place of r.
void thomas(std::vector<double>& lower, std::vector<double>& diag,
            std::vector<double>& upper, std::vector<double>& r) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    r[i] -= w * r[i - 1];
  }
  r[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    r[i] = (r[i] - upper[i] * r[i + 1]) / diag[i];
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct NewtonWork {
  std::vector<double> q, dq, f, g, g_trial, v_trial, lower, diag, upper, delta;
};

// Backward Euler: v - u - dt rhs(v) = 0. Returns false on failure.
bool implicit_solve(const ModelParams& m, const StepperConfig& cfg,
                    const std::vector<double>& u, double h, double dt,
                    std::vector<double>& v, NewtonWork& w, std::size_t& iters) {
  const std::size_t n = u.size();
  v = u;
  auto residual = [&](const std::vector<double>& x, std::vector<double>& g) {
    rhs_into(m, x, h, cfg.backward_policy, w.q, w.f);
    g.resize(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = x[i] - u[i] - dt * w.f[i];
  };
  // F' is not Lipschitz at the wells when theta < 2: one ulp away from +-1
  // it is already ~ulp^(theta-1), which bounds the attainable residual.
  const double tol = std::max(
      cfg.newton_tol,
      dt * std::abs(m.potential.derivative(1.0 - 4.0 * std::numeric_limits<double>::epsilon())));
  residual(v, w.g);
  double gnorm = max_abs(w.g);
  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    ++iters;
    // Jacobian I - dt df/dv, tridiagonal.
    interface_fluxes(m, v, h, cfg.backward_policy, w.q, &w.dq);
    w.lower.assign(n, 0.0);
    w.upper.assign(n, 0.0);
    w.diag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double wh = weight(i, n) * h;
      const double cr = i + 1 < n ? w.dq[i] / wh : 0.0;
      const double cl = i > 0 ? w.dq[i - 1] / wh : 0.0;
      w.diag[i] = 1.0 + dt * (cr + cl + m.potential.second_derivative(v[i]));
      if (i + 1 < n) w.upper[i] = -dt * cr;
      if (i > 0) w.lower[i] = -dt * cl;
    }
    w.delta = w.g;
    thomas(w.lower, w.diag, w.upper, w.delta);
    if (!std::isfinite(max_abs(w.delta))) return false;

    // Backtracking on the max-norm residual.
    double lambda = 1.0;
    bool improved = false;
    while (lambda >= 1.0 / 1024.0) {
      w.v_trial.resize(n);
      for (std::size_t i = 0; i < n; ++i) w.v_trial[i] = v[i] - lambda * w.delta[i];
      residual(w.v_trial, w.g_trial);
      const double trial = max_abs(w.g_trial);
      if (std::isfinite(trial) && trial <= (1.0 - 1e-4 * lambda) * gnorm) {
        improved = true;
        break;
      }
      if (gnorm <= tol && std::isfinite(trial) && trial <= 2.0 * gnorm) {
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) return gnorm <= tol;
    const double step_size = lambda * max_abs(w.delta);
    std::swap(v, w.v_trial);
    std::swap(w.g, w.g_trial);
    gnorm = max_abs(w.g);
    if (step_size <= cfg.newton_tol && gnorm <= std::max(tol, 1e-14 * dt)) {
      return true;
    }
  }
  return false;
}

void note_backward(const ModelParams& m, const StepperConfig& cfg, State& s,
                   double max_grad) {
  if (!(max_grad > m.flux.kappa())) return;
  if (cfg.backward_policy == BackwardPolicy::error) {
    std::ostringstream os;
    os << "backward regime entered at t = " << s.t << ": max eps^2|u_x| = " << max_grad
       << " > kappa = " << m.flux.kappa();
    throw BackwardRegimeError(os.str());
  }
  ++s.stats.backward_steps;
  if (std::isnan(s.stats.first_backward_time)) s.stats.first_backward_time = s.t;
}

double explicit_dt(const ModelParams& m, const std::vector<double>& u, double h,
                   double safety) {
  const double c = m.eps2() / h;
  double qeff = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    qeff = std::max(qeff, std::abs(m.flux.q_prime(c * (u[i + 1] - u[i]))));
  }
  double fmax = 0.0;
  for (double x : u) fmax = std::max(fmax, std::abs(m.potential.second_derivative(x)));
  double dt = std::numeric_limits<double>::infinity();
  if (qeff > 0.0) dt = std::min(dt, safety * h * h / (m.eps2() * qeff));
  if (fmax > 0.0) dt = std::min(dt, safety / fmax);
  return dt;
}

}  // namespace

std::vector<double> rhs(const ModelParams& m, const std::vector<double>& u, double h,
                        BackwardPolicy policy) {
  if (u.size() < 3) throw DomainError("rhs needs at least three nodes");
  std::vector<double> q, out;
  rhs_into(m, u, h, policy, q, out);
  return out;
}

double weighted_l2sq(const std::vector<double>& v, double h) {
  double s = 0.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) s += weight(i, n) * v[i] * v[i];
  return s * h;
}

double max_gradient(const ModelParams& m, const std::vector<double>& u, double h) {
  double g = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) g = std::max(g, std::abs(u[i + 1] - u[i]));
  return m.eps2() * g / h;
}

DiagnosticsRecord diagnose(const ModelParams& m, const StepperConfig& cfg, const State& s) {
  DiagnosticsRecord r;
  const double h = s.u.h();
  r.t = s.t;
  r.energy = energy_total(m, s.u.u, h);
  r.ut_l2sq = weighted_l2sq(rhs(m, s.u.u, h, cfg.backward_policy), h);
  r.zeros = zeros_of(s.u);
  r.n_zeros = r.zeros.size();
  r.max_grad = max_gradient(m, s.u.u, h);
  r.dissipated = s.stats.dissipated;
  return r;
}

namespace {

// <(f0 + f1)/2, d> with the node weights: the energy change over a step is
// -1/eps dt times this, up to terms cubic in the increment.
double trapezoid_rate(const std::vector<double>& f0, const std::vector<double>& f1,
                      const std::vector<double>& d, double h) {
  const std::size_t n = d.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += weight(i, n) * 0.5 * (f0[i] + f1[i]) * d[i];
  return s * h;
}

}  // namespace

State initial_state(const StepperConfig& cfg, const Profile& u0, double t0) {
  cfg.validate();
  if (u0.nodes() < 3) throw DomainError("initial profile needs at least three nodes");
  for (double v : u0.u) {
    if (!std::isfinite(v)) throw DomainError("initial profile has non-finite values");
  }
  State s;
  s.t = t0;
  s.u = u0;
  s.dt = cfg.dt_init;
  return s;
}

void step(const ModelParams& m, const StepperConfig& cfg, State& s, double dt_cap) {
  const double h = s.u.h();
  auto& u = s.u.u;
  const double inv_eps = 1.0 / m.epsilon;

  if (cfg.scheme == Scheme::explicit_adaptive) {
    const double dt = std::min(explicit_dt(m, u, h, cfg.explicit_safety), dt_cap);
    if (!(dt >= cfg.dt_min) && dt < dt_cap) {
      throw StiffnessError("explicit step size fell below dt_min");
    }
    const auto f = rhs(m, u, h, cfg.backward_policy);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt * f[i];
    s.t += dt;
    s.stats.dissipated += inv_eps * dt * trapezoid_rate(f, rhs(m, u, h, cfg.backward_policy), f, h);
    s.stats.last_dt = dt;
    ++s.stats.accepted;
    note_backward(m, cfg, s, max_gradient(m, u, h));
    return;
  }

  static thread_local NewtonWork work;
  std::vector<double> v;
  const double e_old = energy_total(m, u, h);
  int halvings = 0;
  for (;;) {
    double dt = std::min(s.dt, dt_cap);
    if (dt < cfg.dt_min && dt < dt_cap) {
      std::ostringstream os;
      os << "step size " << dt << " below dt_min at t = " << s.t;
      throw StiffnessError(os.str());
    }
    auto reject = [&]() {
      ++s.stats.rejected;
      s.consecutive_accepts = 0;
      s.dt = 0.5 * dt;
      if (++halvings > cfg.max_halvings) {
        std::ostringstream os;
        os << "implicit step failed after " << cfg.max_halvings << " halvings at t = " << s.t;
        throw NewtonError(os.str());
      }
    };
    if (!implicit_solve(m, cfg, u, h, dt, v, work, s.stats.newton_iterations)) {
      reject();
      continue;
    }
    double du = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) du = std::max(du, std::abs(v[i] - u[i]));
    if (du > cfg.max_du) {
      reject();
      continue;
    }
    const double e_new = energy_total(m, v, h);
    if (e_new > e_old + cfg.energy_drift_tol) {
      reject();
      continue;
    }
    // Accept.
    std::vector<double> secant(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) secant[i] = (v[i] - u[i]) / dt;
    const double ut2 = weighted_l2sq(secant, h);
    s.stats.dissipated += inv_eps * dt *
                          trapezoid_rate(rhs(m, u, h, cfg.backward_policy),
                                         rhs(m, v, h, cfg.backward_policy), secant, h);
    std::swap(u, v);
    s.t += dt;
    s.stats.last_dt = dt;
    ++s.stats.accepted;
    note_backward(m, cfg, s, max_gradient(m, u, h));

    // Next proposal: grow after a run of accepts, respecting the cap that
    // applies while the solution is still moving.
    if (dt == s.dt && ++s.consecutive_accepts >= cfg.grow_after) {
      s.dt *= cfg.growth;
      s.consecutive_accepts = 0;
    }
    const double cap = ut2 >= cfg.quiet_threshold ? cfg.dt_max_active : cfg.dt_max;
    s.dt = std::min(s.dt, std::min(cap, cfg.dt_max));
    return;
  }
}

std::vector<double> geometric_checkpoints(double first, double horizon, double ratio) {
  if (!(first > 0.0) || !(ratio > 1.0)) {
    throw DomainError("geometric checkpoints need first > 0 and ratio > 1");
  }
  std::vector<double> c;
  for (double t = first; t < horizon; t *= ratio) c.push_back(t);
  c.push_back(horizon);
  return c;
}

namespace {

double distance_to_wells(const Profile& p) {
  const double h = p.h();
  const std::size_t n = p.nodes();
  double dp = 0.0, dm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dp += weight(i, n) * std::abs(p.u[i] - 1.0);
    dm += weight(i, n) * std::abs(p.u[i] + 1.0);
  }
  return std::min(dp, dm) * h;
}

}  // namespace

EvolveResult evolve(const ModelParams& m, const StepperConfig& cfg, const Profile& u0,
                    double horizon, const std::vector<double>& checkpoints,
                    const EvolveOptions& opts) {
  if (std::abs(u0.a - m.a) > 1e-12 * std::max(1.0, std::abs(m.a)) ||
      std::abs(u0.b - m.b) > 1e-12 * std::max(1.0, std::abs(m.b))) {
    throw DomainError("initial profile is not on the model interval");
  }
  return evolve_from(m, cfg, initial_state(cfg, u0), horizon, checkpoints, opts);
}

EvolveResult evolve_from(const ModelParams& m, const StepperConfig& cfg, State s0,
                         double horizon, const std::vector<double>& checkpoints,
                         const EvolveOptions& opts) {
  cfg.validate();
  EvolveResult res;
  res.final_state = std::move(s0);
  State& s = res.final_state;
  if (s.dt <= 0.0) s.dt = cfg.dt_init;

  std::vector<double> marks;
  for (double c : checkpoints) {
    if (c > s.t && c < horizon) marks.push_back(c);
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  if (horizon > s.t) marks.push_back(horizon);

  res.records.push_back(diagnose(m, cfg, s));
  State previous = s;
  auto stop_now = [&](const DiagnosticsRecord& rec) {
    if (opts.converge_exit && distance_to_wells(s.u) < opts.converge_l1) {
      res.stop_reason = "converged";
      return true;
    }
    if (opts.observer && opts.observer(s, rec)) {
      res.stop_reason = "observer";
      return true;
    }
    return false;
  };
  if (stop_now(res.records.back())) return res;

  for (double target : marks) {
    while (s.t < target) {
      const double remaining = target - s.t;
      if (remaining <= 1e-13 * std::max(1.0, target)) {
        s.t = target;
        break;
      }
      step(m, cfg, s, remaining);
      if (target - s.t <= 1e-13 * std::max(1.0, target)) s.t = target;
    }
    auto rec = diagnose(m, cfg, s);
    if (opts.keep_event_snapshots && rec.n_zeros < res.records.back().n_zeros) {
      res.event_snapshots.push_back(previous);
    }
    res.records.push_back(std::move(rec));
    previous = s;
    if (stop_now(res.records.back())) return res;
  }
  res.stop_reason = "horizon";
  return res;
}

}  // namespace pmlab
