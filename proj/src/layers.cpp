#include "pmlab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include "pmlab/errors.hpp"

namespace pmlab {

std::vector<double> zeros_of(const Profile& p) {
  constexpr double kZero = 1e-14;
  const auto& u = p.u;
  const std::size_t n = u.size();
  std::vector<double> z;
  std::size_t i = 0;
  while (i < n) {
    if (std::abs(u[i]) < kZero) {
      // A run of zero nodes is one zero when the sign changes across it.
      std::size_t r = i;
      while (r + 1 < n && std::abs(u[r + 1]) < kZero) ++r;
      if (i > 0 && r + 1 < n && (u[i - 1] > 0.0) != (u[r + 1] > 0.0)) {
        z.push_back(0.5 * (p.x(i) + p.x(r)));
      }
      i = r + 1;
      continue;
    }
    if (i + 1 < n && std::abs(u[i + 1]) >= kZero && u[i] * u[i + 1] < 0.0) {
      const double t = u[i] / (u[i] - u[i + 1]);
      z.push_back(p.x(i) + t * (p.x(i + 1) - p.x(i)));
    }
    ++i;
  }
  return z;
}

bool ClosedSet::contains(double v) const {
  for (const auto& b : bands) {
    if (v >= b.lo && v <= b.hi) return true;
  }
  return false;
}

ClosedSet default_interface_set() { return ClosedSet{{Band{-0.9, 0.9}}}; }

std::vector<double> interface(const Profile& p, const ClosedSet& k) {
  const auto& u = p.u;
  std::vector<std::pair<double, double>> segs;
  for (const auto& band : k.bands) {
    if (band.lo > band.hi) throw DomainError("interface set band with lo > hi");
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
      const double u0 = u[i], u1 = u[i + 1];
      const double x0 = p.x(i), x1 = p.x(i + 1);
      double t0, t1;
      if (u0 == u1) {
        if (u0 < band.lo || u0 > band.hi) continue;
        t0 = 0.0;
        t1 = 1.0;
      } else {
        // Parameter values where the segment enters and leaves the band.
        const double ta = (band.lo - u0) / (u1 - u0);
        const double tb = (band.hi - u0) / (u1 - u0);
        t0 = std::max(0.0, std::min(ta, tb));
        t1 = std::min(1.0, std::max(ta, tb));
        if (t0 > t1) continue;
      }
      segs.emplace_back(x0 + t0 * (x1 - x0), x0 + t1 * (x1 - x0));
    }
  }
  std::sort(segs.begin(), segs.end());
  std::vector<double> pts;
  std::size_t i = 0;
  while (i < segs.size()) {
    double lo = segs[i].first;
    double hi = segs[i].second;
    std::size_t j = i + 1;
    while (j < segs.size() && segs[j].first <= hi) {
      hi = std::max(hi, segs[j].second);
      ++j;
    }
    pts.push_back(lo);
    if (hi > lo) pts.push_back(hi);
    i = j;
  }
  return pts;
}

namespace {

double directed(const std::vector<double>& from, const std::vector<double>& sorted_to) {
  double d = 0.0;
  for (double x : from) {
    const auto it = std::lower_bound(sorted_to.begin(), sorted_to.end(), x);
    double best = std::numeric_limits<double>::infinity();
    if (it != sorted_to.end()) best = *it - x;
    if (it != sorted_to.begin()) best = std::min(best, x - *std::prev(it));
    d = std::max(d, best);
  }
  return d;
}

}  // namespace

double hausdorff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw EmptySetError("Hausdorff distance of an empty interface");
  }
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return std::max(directed(sa, sb), directed(sb, sa));
}

StepFunctionV make_step_function(double a, double b, std::vector<double> jumps,
                                 double start_value, double r) {
  if (!(r > 0.0)) throw GeometryError("separation r must be positive");
  if (start_value != 1.0 && start_value != -1.0) {
    throw GeometryError("start value must be +1 or -1");
  }
  if (jumps.empty()) throw GeometryError("step function needs at least one jump");
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (i > 0 && !(jumps[i] - jumps[i - 1] >= 2.0 * r)) {
      throw GeometryError("jumps " + std::to_string(i) + " and " + std::to_string(i + 1) +
                          " closer than 2r");
    }
  }
  if (!(a <= jumps.front() - r)) throw GeometryError("first jump closer than r to a");
  if (!(jumps.back() + r <= b)) throw GeometryError("last jump closer than r to b");
  return StepFunctionV{StepFunction{a, b, std::move(jumps), start_value}, r};
}

std::vector<CollapseEvent> collapse_times(const std::vector<DiagnosticsRecord>& records) {
  std::vector<CollapseEvent> ev;
  for (std::size_t k = 1; k < records.size(); ++k) {
    if (records[k].n_zeros < records[k - 1].n_zeros) {
      ev.push_back(CollapseEvent{records[k].t, records[k - 1].n_zeros, records[k].n_zeros,
                                 records[k].zeros, records[k - 1].t});
    }
  }
  return ev;
}

namespace {

// Narrows [lo.t, t_hi] around the first time `hit` becomes true, re-running
// from lo with ten sub-checkpoints per pass. Returns the final bracket.
std::pair<State, State> refine_bracket(const ModelParams& m, const StepperConfig& cfg,
                                       State lo, double t_hi,
                                       const std::function<bool(const State&)>& hit,
                                       double rel_width) {
  State hi_state;
  bool have_hi = false;
  double hi = t_hi;
  for (int pass = 0; pass < 60 && hi - lo.t > rel_width * hi; ++pass) {
    std::vector<double> marks;
    for (int k = 1; k <= 10; ++k) marks.push_back(lo.t + (hi - lo.t) * k / 10.0);
    State prev = lo;
    bool found = false;
    State new_lo, new_hi;
    EvolveOptions opts;
    opts.converge_exit = false;
    opts.keep_event_snapshots = false;
    opts.observer = [&](const State& s, const DiagnosticsRecord&) {
      if (s.t > lo.t && hit(s)) {
        new_lo = prev;
        new_hi = s;
        found = true;
        return true;
      }
      prev = s;
      return false;
    };
    auto run = evolve_from(m, cfg, lo, hi, marks, opts);
    if (!found) {
      // Step sequences differ slightly between passes; keep the last bracket.
      if (!have_hi) {
        hi_state = run.final_state;
        have_hi = true;
      }
      break;
    }
    lo = new_lo;
    hi_state = new_hi;
    have_hi = true;
    hi = new_hi.t;
  }
  if (!have_hi) {
    EvolveOptions opts;
    opts.converge_exit = false;
    opts.keep_event_snapshots = false;
    hi_state = evolve_from(m, cfg, lo, hi, {}, opts).final_state;
  }
  return {lo, hi_state};
}

}  // namespace

std::vector<CollapseEvent> collapse_times(const ModelParams& m, const StepperConfig& cfg,
                                          const EvolveResult& run, double rel_width) {
  auto coarse = collapse_times(run.records);
  if (coarse.size() != run.event_snapshots.size()) {
    throw DomainError("collapse refinement needs the run's event snapshots");
  }
  for (std::size_t e = 0; e < coarse.size(); ++e) {
    auto& ev = coarse[e];
    const std::size_t before = ev.zeros_before;
    auto [lo, hi] = refine_bracket(
        m, cfg, run.event_snapshots[e], ev.t,
        [before](const State& s) { return zeros_of(s.u).size() < before; }, rel_width);
    ev.t_lo = lo.t;
    ev.t = hi.t;
    ev.positions = zeros_of(hi.u);
    ev.zeros_after = ev.positions.size();
  }
  return coarse;
}

double t_eps_exit(const ModelParams& m, const StepperConfig& cfg, const Profile& u0,
                  double delta1, const ClosedSet& k, double horizon,
                  double checkpoint_ratio, double rel_width) {
  const auto inf = std::numeric_limits<double>::infinity();
  if (delta1 >= m.length()) return inf;
  const auto i0 = interface(u0, k);
  if (i0.empty()) throw EmptySetError("initial interface is empty");
  auto exited = [&](const State& s) {
    const auto i = interface(s.u, k);
    return i.empty() || hausdorff(i, i0) > delta1;
  };
  State prev = initial_state(cfg, u0);
  State lo;
  double t_hit = inf;
  EvolveOptions opts;
  opts.converge_exit = false;
  opts.keep_event_snapshots = false;
  opts.observer = [&](const State& s, const DiagnosticsRecord&) {
    if (s.t > 0.0 && exited(s)) {
      lo = prev;
      t_hit = s.t;
      return true;
    }
    prev = s;
    return false;
  };
  const double first = std::min(0.1, horizon);
  evolve(m, cfg, u0, horizon, geometric_checkpoints(first, horizon, checkpoint_ratio), opts);
  if (!std::isfinite(t_hit)) return inf;
  return refine_bracket(m, cfg, lo, t_hit, exited, rel_width).second.t;
}

}  // namespace pmlab
