// pmlab: command-line front end for the experiment harness.
//
//   pmlab constants  --preset exp1
//   pmlab stationary --preset exp1 --kind periodic --zeros 4 --out out/
//   pmlab evolve     --preset exp2-fast --out out/exp2-fast
//   pmlab family     --family law-d --out out/law-d
//   pmlab verify     --preset exp4a
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 band miss or
// failed check (verify only).

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/harness.hpp"
#include "pmlab/inversion.hpp"
#include "pmlab/profile.hpp"
#include "pmlab/stationary.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;
constexpr int kBandMiss = 4;

struct Common {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::size_t grid = 0;
  std::string scheme;
  bool seedless = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "config file (flat key = value)");
  cmd->add_option("--preset", c.preset, "built-in preset name");
  cmd->add_option("--out", c.out_dir, "output directory");
  cmd->add_option("--grid", c.grid, "number of cells (overrides grid.cells)");
  cmd->add_option("--scheme", c.scheme, "explicit or implicit")
      ->check(CLI::IsMember({"explicit", "implicit"}));
  cmd->add_flag("--seedless", c.seedless, "assert that no random numbers are used");
  cmd->add_option("--set", c.overrides, "key=value override, repeatable");
}

pmlab::Config resolve_config(const Common& c) {
  pmlab::Config cfg;
  if (!c.config_path.empty()) cfg = pmlab::load_config(c.config_path);
  if (!c.preset.empty()) {
    if (cfg.has("base")) throw pmlab::ConfigError("base: given both in config and --preset");
    cfg.set("base", c.preset);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pmlab::ConfigError("--set: expected key=value, got " + kv);
    auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
    cfg.entries.erase(key);
    auto one = pmlab::parse_config(key + " = " + value);
    for (auto& [k, v] : one.entries) cfg.set(k, v);
  }
  if (c.grid > 0) cfg.set("grid.cells", std::to_string(c.grid));
  if (!c.scheme.empty()) cfg.set("stepper.scheme", c.scheme);
  return cfg;
}

pmlab::ExperimentPreset resolve_preset(const Common& c) {
  return pmlab::preset_from_config(resolve_config(c));
}

void print_constants(const pmlab::ModelParams& m) {
  const auto k = pmlab::model_constants(m);
  std::printf("flux       %s\n", m.flux.name().c_str());
  std::printf("theta      %.17g\n", m.potential.theta());
  std::printf("epsilon    %.17g\n", m.epsilon);
  std::printf("kappa      %.17g\n", k.kappa);
  std::printf("ell        %.17g\n", k.ell);
  std::printf("Q'(0)      %.17g\n", k.q_prime0);
  std::printf("eps0       %.17g\n", k.eps0);
  std::printf("c_eps      %.17g\n", k.c_eps);
  std::printf("c0         %.17g\n", k.c0);
}

int cmd_constants(const Common& c) {
  print_constants(pmlab::model_of(resolve_preset(c)));
  return kOk;
}

int cmd_stationary(const Common& c, const std::string& kind, int zeros) {
  const auto p = resolve_preset(c);
  const auto m = pmlab::model_of(p);
  const std::size_t n = p.cells + 1;
  const std::string dir = c.out_dir.empty() ? "." : c.out_dir;
  std::filesystem::create_directories(dir);
  pmlab::Profile prof;
  if (kind == "wave") {
    auto [w, report] = pmlab::standing_wave(m, n);
    prof = std::move(w);
    std::printf("regime %s\n", pmlab::regime_name(report.regime));
    if (report.x1) std::printf("contact points %.17g %.17g\n", *report.x1, *report.x2);
    if (report.decay_fit) {
      std::printf("decay fit %.17g %.17g\n", report.decay_fit->first, report.decay_fit->second);
    }
  } else if (kind == "compacton") {
    prof = pmlab::compacton(m, p.datum.points, p.datum.start_value, n);
    std::printf("energy %.17g  N c_eps %.17g\n", pmlab::energy(m, prof).total,
                static_cast<double>(p.datum.points.size()) * pmlab::c_eps(m));
  } else {
    if (zeros < 1) throw pmlab::ConfigError("--zeros: must be >= 1 for periodic profiles");
    const auto info = pmlab::periodic_info(m, zeros);
    prof = pmlab::periodic_profile(m, zeros, n);
    std::printf("sbar %.17g  half period %.17g\n", info.sbar, info.half_period);
  }
  const auto path = (std::filesystem::path(dir) / (kind + ".csv")).string();
  pmlab::write_profile_csv(path, prof);
  std::printf("wrote %s\n", path.c_str());
  return kOk;
}

int cmd_evolve(const Common& c) {
  const auto p = resolve_preset(c);
  pmlab::RunOptions opts;
  opts.out_dir = c.out_dir;
  opts.seedless = c.seedless;
  const auto r = pmlab::run(p, opts);
  std::printf("%s: %s, stop %s, t = %.6g, %.2f s\n", p.name.c_str(), pmlab::status_name(r.status),
              r.stop_reason.c_str(), r.records.empty() ? 0.0 : r.records.back().t,
              r.wall_seconds);
  for (const auto& e : r.events) {
    std::printf("  collapse %zu -> %zu at t in [%.6g, %.6g]\n", e.zeros_before, e.zeros_after,
                e.t_lo, e.t);
  }
  if (r.status != pmlab::RunStatus::ok) {
    std::fprintf(stderr, "numerical failure: %s\n", r.error.c_str());
    return kNumerical;
  }
  return kOk;
}

int cmd_family(const Common& c, const std::string& family, unsigned threads) {
  pmlab::Config cfg = resolve_config(c);
  if (!family.empty()) cfg.set("family.base", family);
  if (threads > 0) cfg.set("family.threads", std::to_string(threads));
  const auto f = pmlab::family_from_config(cfg);
  const auto law = pmlab::timing_law(f);
  for (std::size_t i = 0; i < law.t.size(); ++i) {
    std::printf("  value %-8g %s = %-10.6g t = %.6g\n", law.values[i], law.x_label.c_str(),
                law.x[i], law.t[i]);
  }
  std::printf("ln t vs %s: slope %.6g intercept %.6g R2 %.6f\n", law.x_label.c_str(),
              law.fit.slope, law.fit.intercept, law.fit.r2);
  if (!c.out_dir.empty()) pmlab::write_timing_law(c.out_dir, law);
  return kOk;
}

int cmd_verify(const Common& c, bool skip_run) {
  const auto p = resolve_preset(c);
  const auto m = pmlab::model_of(p);
  bool ok = true;
  auto line = [&](bool pass, const std::string& what) {
    std::printf("%s  %s\n", pass ? "PASS" : "FAIL", what.c_str());
    ok = ok && pass;
  };

  const pmlab::InversionContext ctx(m);
  double worst = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double s = ctx.s_max() * i / 1000.0;
    const double back = pmlab::j_eps(ctx, pmlab::p_eps(ctx, s));
    worst = std::max(worst, std::abs(back - s) / s);
  }
  line(worst <= 1e-8, "inversion round trip, worst relative error " + pmlab::format_double(worst));

  const auto ineq = pmlab::verify_pointwise_inequality(ctx, 200);
  line(ineq.min_value >= -1e-10,
       "pointwise inequality, minimum " + pmlab::format_double(ineq.min_value));

  if (!skip_run) {
    pmlab::RunOptions opts;
    opts.out_dir = c.out_dir;
    opts.seedless = c.seedless;
    const auto r = pmlab::run(p, opts);
    if (r.status != pmlab::RunStatus::ok) {
      std::fprintf(stderr, "numerical failure: %s\n", r.error.c_str());
      return kNumerical;
    }
    std::size_t rises = 0;
    for (std::size_t k = 1; k < r.records.size(); ++k) {
      if (r.records[k].energy > r.records[k - 1].energy + p.stepper.energy_drift_tol) ++rises;
    }
    line(rises == 0, "energy nonincreasing over " + std::to_string(r.records.size()) +
                         " checkpoints");
    for (const auto& b : p.expect) {
      const bool hit = b.event <= r.events.size() && r.events[b.event - 1].t >= b.lo &&
                       r.events[b.event - 1].t <= b.hi;
      char msg[200];
      std::snprintf(msg, sizeof msg, "%s event %zu in [%g, %g]: t = %g", p.name.c_str(), b.event,
                    b.lo, b.hi, b.event <= r.events.size() ? r.events[b.event - 1].t : NAN);
      line(hit, msg);
    }
  }
  return ok ? kOk : kBandMiss;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perona-Malik type Allen-Cahn slow-motion laboratory"};
  app.require_subcommand(1);

  Common common;
  std::string kind = "wave";
  int zeros = 0;
  std::string family;
  unsigned threads = 0;
  bool skip_run = false;

  auto* constants = app.add_subcommand("constants", "print kappa, ell, Q'(0), eps0, c_eps, c0");
  add_common(constants, common);
  auto* stationary = app.add_subcommand("stationary", "write a stationary profile");
  add_common(stationary, common);
  stationary->add_option("--kind", kind, "wave, compacton or periodic")
      ->check(CLI::IsMember({"wave", "compacton", "periodic"}));
  stationary->add_option("--zeros", zeros, "number of zeros of the periodic profile");
  auto* evolve = app.add_subcommand("evolve", "run one preset");
  add_common(evolve, common);
  auto* fam = app.add_subcommand("family", "fit a timing law over a preset family");
  add_common(fam, common);
  fam->add_option("--family", family, "built-in family (law-d, law-eps2, law-eps4)");
  fam->add_option("--threads", threads, "runs in flight at once");
  auto* verify = app.add_subcommand("verify", "inequality checks, energy decay and time bands");
  add_common(verify, common);
  verify->add_flag("--no-run", skip_run, "skip the evolution and band checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*constants) return cmd_constants(common);
    if (*stationary) return cmd_stationary(common, kind, zeros);
    if (*evolve) return cmd_evolve(common);
    if (*fam) return cmd_family(common, family, threads);
    if (*verify) return cmd_verify(common, skip_run);
  } catch (const pmlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const pmlab::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
