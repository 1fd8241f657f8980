#include "pmlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <boost/version.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "pmlab/energy.hpp"
#include "pmlab/errors.hpp"
#include "pmlab/stationary.hpp"

#ifndef PMLAB_VERSION
#define PMLAB_VERSION "dev"
#endif

namespace pmlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto lo = s.find_first_not_of(ws);
  if (lo == std::string_view::npos) return {};
  const auto hi = s.find_last_not_of(ws);
  return std::string(s.substr(lo, hi - lo + 1));
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || p != end || t.empty()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || p != end || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> v;
  if (trim(text).empty()) return v;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    v.push_back(to_double(key, std::string(rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return v;
}

std::string join(const std::vector<double>& v, const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

bool Config::has(const std::string& key) const { return entries.count(key) != 0; }

const std::string& Config::at(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) throw ConfigError(key + ": missing");
  return it->second;
}

void Config::set(const std::string& key, std::string value) {
  entries[key] = std::move(value);
}

Config parse_config(std::string_view text) {
  Config c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (c.has(key)) {
      throw ConfigError(key + ": duplicate key on line " + std::to_string(line_no));
    }
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config& c) {
  std::string s;
  for (const auto& [k, v] : c.entries) s += k + " = " + v + "\n";
  return s;
}

// ---------------------------------------------------------------- presets

const char* datum_name(DatumKind k) {
  switch (k) {
    case DatumKind::layers: return "layers";
    case DatumKind::compacton: return "compacton";
    case DatumKind::perturbation: return "perturbation";
    case DatumKind::csv: return "csv";
  }
  return "?";
}

const char* status_name(RunStatus s) {
  return s == RunStatus::ok ? "ok" : "numerical_failure";
}

void ExperimentPreset::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("model.epsilon: must be positive");
  if (!(b > a)) throw ConfigError("model.b: must exceed model.a");
  if (!(alpha > 0.0)) throw ConfigError("flux.alpha: must be positive");
  if (!(theta > 1.0)) throw ConfigError("potential.theta: must exceed 1");
  if (cells < 8) throw ConfigError("grid.cells: need at least 8 cells");
  if (!(horizon > 0.0)) throw ConfigError("run.horizon: must be positive");
  if (!(checkpoint_first > 0.0)) throw ConfigError("run.checkpoint_first: must be positive");
  if (!(checkpoint_ratio > 1.0)) throw ConfigError("run.checkpoint_ratio: must exceed 1");
  if (horizon > 1e8 && stepper.scheme != Scheme::implicit_adaptive) {
    throw ConfigError("stepper.scheme: horizons above 1e8 need the implicit scheme");
  }
  if (datum.start_value != 1.0 && datum.start_value != -1.0) {
    throw ConfigError("init.start_value: must be 1 or -1");
  }
  if (datum.kind == DatumKind::perturbation && !(datum.amplitude > 0.0)) {
    throw ConfigError("init.amplitude: must be positive");
  }
  if (datum.kind == DatumKind::csv && datum.path.empty()) {
    throw ConfigError("init.path: required for init.kind = csv");
  }
  if (datum.kind != DatumKind::csv && datum.kind != DatumKind::perturbation &&
      datum.points.empty()) {
    throw ConfigError("init.points: at least one layer position is required");
  }
  if (!std::is_sorted(datum.points.begin(), datum.points.end())) {
    throw ConfigError("init.points: must be increasing");
  }
  for (const auto& e : expect) {
    if (e.event == 0 || !(e.lo <= e.hi)) {
      throw ConfigError("expect.event." + std::to_string(e.event) + ": need lo <= hi");
    }
  }
  try {
    stepper.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("stepper: ") + e.what());
  }
  try {
    model_of(*this);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model.epsilon: ") + e.what());
  }
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> k = {
      "base", "name", "flux.kind", "flux.alpha", "potential.theta", "potential.eta",
      "model.epsilon", "model.a", "model.b", "model.allow_large_epsilon", "grid.cells",
      "init.kind", "init.points", "init.start_value", "init.amplitude", "init.path",
      "run.horizon", "run.checkpoint_first", "run.checkpoint_ratio", "run.snapshot_every",
      "run.refine_events", "run.converge_exit", "stepper.scheme", "stepper.dt_init",
      "stepper.dt_max", "stepper.dt_min", "stepper.dt_max_active", "stepper.quiet_threshold",
      "stepper.newton_tol", "stepper.newton_max_iter", "stepper.max_halvings",
      "stepper.energy_drift_tol", "stepper.max_du", "stepper.explicit_safety",
      "stepper.growth", "stepper.grow_after", "stepper.backward_policy"};
  return k;
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

Scheme parse_scheme(const std::string& key, const std::string& v) {
  if (v == "implicit") return Scheme::implicit_adaptive;
  if (v == "explicit") return Scheme::explicit_adaptive;
  throw ConfigError(key + ": expected implicit or explicit, got '" + v + "'");
}

BackwardPolicy parse_policy(const std::string& key, const std::string& v) {
  if (v == "error") return BackwardPolicy::error;
  if (v == "warn") return BackwardPolicy::warn;
  if (v == "clamp") return BackwardPolicy::clamp;
  throw ConfigError(key + ": expected error, warn or clamp, got '" + v + "'");
}

}  // namespace

ExperimentPreset preset_from_config(const Config& c) {
  ExperimentPreset p;
  if (c.has("base")) {
    p = builtin_preset(c.at("base"));
  } else {
    p = builtin_preset("exp1");
    p.name = "custom";
    p.expect.clear();
  }
  for (const auto& [key, value] : c.entries) {
    if (starts_with(key, "family.")) continue;
    if (starts_with(key, "expect.event.")) {
      const auto k = to_integer(key, key.substr(13));
      const auto v = to_list(key, value);
      if (k < 1 || (v.size() != 2 && v.size() != 3)) {
        throw ConfigError(key + ": expected 'lo, hi' or 'lo, hi, reference'");
      }
      EventBand band{static_cast<std::size_t>(k), v[0], v[1], v.size() == 3 ? v[2] : 0.0};
      auto it = std::find_if(p.expect.begin(), p.expect.end(),
                             [&](const EventBand& e) { return e.event == band.event; });
      if (it != p.expect.end()) {
        *it = band;
      } else {
        p.expect.push_back(band);
      }
      continue;
    }
    if (!known_keys().count(key)) throw ConfigError(key + ": unknown key");
  }
  auto num = [&](const char* key, double& field) {
    if (c.has(key)) field = to_double(key, c.at(key));
  };
  if (c.has("name")) p.name = c.at("name");
  if (c.has("flux.kind")) {
    const auto& v = c.at("flux.kind");
    if (v == "rational") {
      p.flux_kind = FluxKind::rational;
    } else if (v == "gaussian") {
      p.flux_kind = FluxKind::gaussian;
    } else {
      throw ConfigError("flux.kind: expected rational or gaussian, got '" + v + "'");
    }
  }
  num("flux.alpha", p.alpha);
  num("potential.theta", p.theta);
  num("potential.eta", p.eta);
  num("model.epsilon", p.epsilon);
  num("model.a", p.a);
  num("model.b", p.b);
  if (c.has("model.allow_large_epsilon")) {
    p.allow_large_epsilon = to_bool("model.allow_large_epsilon", c.at("model.allow_large_epsilon"));
  }
  if (c.has("grid.cells")) {
    const auto n = to_integer("grid.cells", c.at("grid.cells"));
    if (n < 8) throw ConfigError("grid.cells: need at least 8 cells");
    p.cells = static_cast<std::size_t>(n);
  }
  if (c.has("init.kind")) {
    const auto& v = c.at("init.kind");
    if (v == "layers") {
      p.datum.kind = DatumKind::layers;
    } else if (v == "compacton") {
      p.datum.kind = DatumKind::compacton;
    } else if (v == "perturbation") {
      p.datum.kind = DatumKind::perturbation;
    } else if (v == "csv") {
      p.datum.kind = DatumKind::csv;
    } else {
      throw ConfigError("init.kind: expected layers, compacton, perturbation or csv, got '" +
                        v + "'");
    }
  }
  if (c.has("init.points")) p.datum.points = to_list("init.points", c.at("init.points"));
  num("init.start_value", p.datum.start_value);
  num("init.amplitude", p.datum.amplitude);
  if (c.has("init.path")) p.datum.path = c.at("init.path");
  num("run.horizon", p.horizon);
  num("run.checkpoint_first", p.checkpoint_first);
  num("run.checkpoint_ratio", p.checkpoint_ratio);
  if (c.has("run.snapshot_every")) {
    const auto n = to_integer("run.snapshot_every", c.at("run.snapshot_every"));
    if (n < 0) throw ConfigError("run.snapshot_every: must be >= 0");
    p.snapshot_every = static_cast<std::size_t>(n);
  }
  if (c.has("run.refine_events")) {
    p.refine_events = to_bool("run.refine_events", c.at("run.refine_events"));
  }
  if (c.has("run.converge_exit")) {
    p.converge_exit = to_bool("run.converge_exit", c.at("run.converge_exit"));
  }
  auto& s = p.stepper;
  if (c.has("stepper.scheme")) s.scheme = parse_scheme("stepper.scheme", c.at("stepper.scheme"));
  num("stepper.dt_init", s.dt_init);
  num("stepper.dt_max", s.dt_max);
  num("stepper.dt_min", s.dt_min);
  num("stepper.dt_max_active", s.dt_max_active);
  num("stepper.quiet_threshold", s.quiet_threshold);
  num("stepper.newton_tol", s.newton_tol);
  if (c.has("stepper.newton_max_iter")) {
    s.newton_max_iter = static_cast<int>(
        to_integer("stepper.newton_max_iter", c.at("stepper.newton_max_iter")));
  }
  if (c.has("stepper.max_halvings")) {
    s.max_halvings =
        static_cast<int>(to_integer("stepper.max_halvings", c.at("stepper.max_halvings")));
  }
  num("stepper.energy_drift_tol", s.energy_drift_tol);
  num("stepper.max_du", s.max_du);
  num("stepper.explicit_safety", s.explicit_safety);
  num("stepper.growth", s.growth);
  if (c.has("stepper.grow_after")) {
    s.grow_after = static_cast<int>(to_integer("stepper.grow_after", c.at("stepper.grow_after")));
  }
  if (c.has("stepper.backward_policy")) {
    s.backward_policy = parse_policy("stepper.backward_policy", c.at("stepper.backward_policy"));
  }
  std::sort(p.expect.begin(), p.expect.end(),
            [](const EventBand& x, const EventBand& y) { return x.event < y.event; });
  p.validate();
  return p;
}

Config preset_to_config(const ExperimentPreset& p) {
  Config c;
  const auto d = [](double v) { return format_double(v); };
  c.set("name", p.name);
  c.set("flux.kind", p.flux_kind == FluxKind::rational ? "rational" : "gaussian");
  c.set("flux.alpha", d(p.alpha));
  c.set("potential.theta", d(p.theta));
  c.set("potential.eta", d(p.eta));
  c.set("model.epsilon", d(p.epsilon));
  c.set("model.a", d(p.a));
  c.set("model.b", d(p.b));
  c.set("model.allow_large_epsilon", p.allow_large_epsilon ? "true" : "false");
  c.set("grid.cells", std::to_string(p.cells));
  c.set("init.kind", datum_name(p.datum.kind));
  c.set("init.points", join(p.datum.points));
  c.set("init.start_value", d(p.datum.start_value));
  c.set("init.amplitude", d(p.datum.amplitude));
  if (!p.datum.path.empty()) c.set("init.path", p.datum.path);
  c.set("run.horizon", d(p.horizon));
  c.set("run.checkpoint_first", d(p.checkpoint_first));
  c.set("run.checkpoint_ratio", d(p.checkpoint_ratio));
  c.set("run.snapshot_every", std::to_string(p.snapshot_every));
  c.set("run.refine_events", p.refine_events ? "true" : "false");
  c.set("run.converge_exit", p.converge_exit ? "true" : "false");
  const auto& s = p.stepper;
  c.set("stepper.scheme", s.scheme == Scheme::implicit_adaptive ? "implicit" : "explicit");
  c.set("stepper.dt_init", d(s.dt_init));
  c.set("stepper.dt_max", d(s.dt_max));
  c.set("stepper.dt_min", d(s.dt_min));
  c.set("stepper.dt_max_active", d(s.dt_max_active));
  c.set("stepper.quiet_threshold", d(s.quiet_threshold));
  c.set("stepper.newton_tol", d(s.newton_tol));
  c.set("stepper.newton_max_iter", std::to_string(s.newton_max_iter));
  c.set("stepper.max_halvings", std::to_string(s.max_halvings));
  c.set("stepper.energy_drift_tol", d(s.energy_drift_tol));
  c.set("stepper.max_du", d(s.max_du));
  c.set("stepper.explicit_safety", d(s.explicit_safety));
  c.set("stepper.growth", d(s.growth));
  c.set("stepper.grow_after", std::to_string(s.grow_after));
  c.set("stepper.backward_policy", policy_name(s.backward_policy));
  for (const auto& e : p.expect) {
    std::vector<double> v{e.lo, e.hi};
    if (e.paper != 0.0) v.push_back(e.paper);
    c.set("expect.event." + std::to_string(e.event), join(v));
  }
  return c;
}

namespace {

const std::vector<double> kExp1Layers = {-3.4, -2.0, 0.0, 0.9, 2.2, 3.2};

ExperimentPreset layered(std::string name, FluxKind kind, double alpha, double theta,
                         double horizon) {
  ExperimentPreset p;
  p.name = std::move(name);
  p.flux_kind = kind;
  p.alpha = alpha;
  p.theta = theta;
  p.datum.kind = DatumKind::layers;
  p.datum.points = kExp1Layers;
  p.datum.start_value = -1.0;
  p.horizon = horizon;
  return p;
}

// u* on (-4,-3) and (1,4), -u* on (-3,1).
DatumSpec perturbation_datum() {
  DatumSpec d;
  d.kind = DatumKind::perturbation;
  d.points = {-3.0, 1.0};
  d.start_value = 1.0;
  d.amplitude = 0.01;
  return d;
}

// Band x/3 .. 3x around a reference value.
EventBand band3(std::size_t event, double ref) {
  return EventBand{event, ref / 3.0, ref * 3.0, ref};
}

}  // namespace

std::vector<std::string> builtin_preset_names() {
  return {"exp1", "exp2-slow", "exp2-fast", "exp3", "exp4a", "exp4b"};
}

ExperimentPreset builtin_preset(const std::string& name) {
  if (name == "exp1") {
    auto p = layered(name, FluxKind::rational, 1.0, 2.0, 1e5);
    p.expect = {EventBand{1, 2.3e3, 2.1e4, 7e3}, band3(2, 2.9e4)};
    return p;
  }
  if (name == "exp2-slow") {
    auto p = layered(name, FluxKind::rational, 0.25, 2.0, 1e12);
    p.expect = {EventBand{1, 1e9, 1e11, 1e10}};
    return p;
  }
  if (name == "exp2-fast") {
    auto p = layered(name, FluxKind::rational, 2.0, 2.0, 1e4);
    p.expect = {EventBand{1, 70.0, 600.0, 200.0}, EventBand{2, 160.0, 1400.0, 470.0}};
    return p;
  }
  if (name == "exp3") {
    auto p = layered(name, FluxKind::rational, 1.0, 2.0, 1e13);
    p.datum = perturbation_datum();
    p.expect = {EventBand{1, 1e10, 1e12, 1e11}};
    return p;
  }
  if (name == "exp4a") {
    // "Two bumps gone": the second event, after which at most two zeros remain.
    auto p = layered(name, FluxKind::gaussian, 1.0, 4.0, 1e4);
    p.expect = {EventBand{2, 150.0, 1350.0, 450.0}};
    return p;
  }
  if (name == "exp4b") {
    auto p = layered(name, FluxKind::gaussian, 1.0, 3.0, 1e6);
    p.datum = perturbation_datum();
    p.expect = {EventBand{1, 2.7e4, 2.4e5, 8e4}};
    return p;
  }
  throw ConfigError("preset: unknown name '" + name + "'");
}

ModelParams model_of(const ExperimentPreset& p) {
  const auto flux = p.flux_kind == FluxKind::rational ? FluxSpec::rational(p.alpha)
                                                      : FluxSpec::gaussian(p.alpha);
  return make_model(p.epsilon, p.a, p.b, flux, PotentialSpec::double_well(p.theta, p.eta),
                    p.allow_large_epsilon);
}

namespace {
Profile build_datum(const ExperimentPreset& p, const ModelParams& m);
}  // namespace

Profile initial_datum(const ExperimentPreset& p, const ModelParams& m) {
  try {
    return build_datum(p, m);
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("init.points: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("init: ") + e.what());
  }
}

namespace {

Profile build_datum(const ExperimentPreset& p, const ModelParams& m) {
  const std::size_t n = p.cells + 1;
  const auto& d = p.datum;
  switch (d.kind) {
    case DatumKind::layers:
      return transition_layer_datum(m, d.points, n, d.start_value);
    case DatumKind::compacton:
      return compacton(m, d.points, d.start_value, n);
    case DatumKind::perturbation: {
      const auto pts = d.points;
      const double amp = d.amplitude * d.start_value;
      return sample_profile(m.a, m.b, n, [pts, amp](double x) {
        const auto k = std::upper_bound(pts.begin(), pts.end(), x) - pts.begin();
        return k % 2 == 0 ? amp : -amp;
      }, "perturbation");
    }
    case DatumKind::csv: {
      auto u = read_profile_csv(d.path);
      if (u.nodes() != n || std::abs(u.a - m.a) > 1e-9 || std::abs(u.b - m.b) > 1e-9) {
        throw ConfigError("init.path: profile grid does not match model.a, model.b, grid.cells");
      }
      return u;
    }
  }
  throw ConfigError("init.kind: unsupported");
}

}  // namespace

ModelConstants model_constants(const ModelParams& m) {
  ModelConstants c;
  c.kappa = m.flux.kappa();
  c.ell = m.flux.ell();
  c.q_prime0 = m.flux.q_prime0();
  c.eps0 = eps0_of(m.flux, m.potential);
  c.c_eps = c_eps(m);
  c.c0 = c0(m);
  return c;
}

// ---------------------------------------------------------------- run

namespace {

std::string zeros_field(const std::vector<double>& z) { return join(z, ";"); }

json constants_json(const ModelConstants& c) {
  return json{{"kappa", c.kappa}, {"ell", c.ell}, {"Q_prime0", c.q_prime0},
              {"eps0", c.eps0},   {"c_eps", c.c_eps}, {"c0", c.c0}};
}

json versions_json() {
  return json{{"pmlab", PMLAB_VERSION},
              {"boost", BOOST_LIB_VERSION},
              {"compiler", __VERSION__},
              {"cplusplus", static_cast<long>(__cplusplus)}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("output: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json event_json(const CollapseEvent& e) {
  return json{{"t", e.t},
              {"t_lo", e.t_lo},
              {"zeros_before", e.zeros_before},
              {"zeros_after", e.zeros_after},
              {"positions", e.positions}};
}

}  // namespace

RunOutcome run(const ExperimentPreset& p, const RunOptions& opts) {
  p.validate();
  const auto m = model_of(p);
  const auto u0 = initial_datum(p, m);
  const auto constants = model_constants(m);
  const bool write = !opts.out_dir.empty();
  const fs::path out(opts.out_dir);

  RunOutcome r;
  json manifest;
  if (write) {
    fs::create_directories(out);
    if (p.snapshot_every > 0) fs::create_directories(out / "profiles");
    manifest["name"] = p.name;
    manifest["config"] = preset_to_config(p).entries;
    manifest["constants"] = constants_json(constants);
    manifest["versions"] = versions_json();
    manifest["seedless"] = opts.seedless;
    manifest["status"] = "running";
    write_json(out / "manifest.json", manifest);
  }

  std::ofstream diag;
  if (write) {
    diag.open(out / "diagnostics.csv", std::ios::binary);
    diag << "t,E,ut_l2sq,n_zeros,zeros,max_grad,E_gradient,E_potential,dissipated\n";
    r.files.push_back("diagnostics.csv");
    write_profile_csv((out / "initial.csv").string(), u0);
    r.files.push_back("initial.csv");
  }

  std::size_t checkpoint = 0;
  EvolveOptions eo;
  eo.converge_exit = p.converge_exit;
  eo.keep_event_snapshots = p.refine_events;
  eo.observer = [&](const State& s, const DiagnosticsRecord& rec) {
    r.records.push_back(rec);
    if (write) {
      const auto br = energy(m, s.u);
      diag << format_double(rec.t) << ',' << format_double(rec.energy) << ','
           << format_double(rec.ut_l2sq) << ',' << rec.n_zeros << ',' << zeros_field(rec.zeros)
           << ',' << format_double(rec.max_grad) << ',' << format_double(br.gradient_part) << ','
           << format_double(br.potential_part) << ',' << format_double(rec.dissipated) << '\n';
      diag.flush();
      if (p.snapshot_every > 0 && checkpoint % p.snapshot_every == 0) {
        char name[40];
        std::snprintf(name, sizeof name, "profiles/profile_%06zu.csv", checkpoint);
        write_profile_csv((out / name).string(), s.u);
        r.files.push_back(name);
      }
    }
    ++checkpoint;
    return false;
  };

  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto res = evolve(m, p.stepper, u0, p.horizon,
                      geometric_checkpoints(std::min(p.checkpoint_first, p.horizon), p.horizon,
                                            p.checkpoint_ratio),
                      eo);
    r.stop_reason = res.stop_reason;
    r.events = p.refine_events ? collapse_times(m, p.stepper, res) : collapse_times(res.records);
    r.final_state = std::move(res.final_state);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.status = RunStatus::numerical_failure;
    r.error = e.what();
    r.stop_reason = "error";
    r.events = collapse_times(r.records);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (write) {
    diag.close();
    std::ofstream ev(out / "events.csv", std::ios::binary);
    ev << "t,zeros_before,zeros_after,positions,t_lo\n";
    for (const auto& e : r.events) {
      ev << format_double(e.t) << ',' << e.zeros_before << ',' << e.zeros_after << ','
         << zeros_field(e.positions) << ',' << format_double(e.t_lo) << '\n';
    }
    r.files.push_back("events.csv");
    if (r.status == RunStatus::ok) {
      write_profile_csv((out / "final.csv").string(), r.final_state.u);
      r.files.push_back("final.csv");
    }
    const auto& st = r.final_state.stats;
    manifest["status"] = status_name(r.status);
    manifest["error"] = r.error;
    manifest["stop_reason"] = r.stop_reason;
    manifest["wall_seconds"] = r.wall_seconds;
    manifest["final_time"] = r.records.empty() ? 0.0 : r.records.back().t;
    manifest["stats"] = json{{"accepted", st.accepted},
                             {"rejected", st.rejected},
                             {"newton_iterations", st.newton_iterations},
                             {"backward_steps", st.backward_steps},
                             {"dissipated", st.dissipated}};
    if (std::isfinite(st.first_backward_time)) {
      manifest["stats"]["first_backward_time"] = st.first_backward_time;
    }
    json evs = json::array();
    for (const auto& e : r.events) evs.push_back(event_json(e));
    manifest["events"] = evs;
    json bands = json::array();
    const auto misses = check_bands(p, r);
    for (const auto& b : p.expect) {
      json jb{{"event", b.event}, {"lo", b.lo}, {"hi", b.hi}};
      if (b.paper != 0.0) jb["reference"] = b.paper;
      if (b.event <= r.events.size()) jb["t"] = r.events[b.event - 1].t;
      bands.push_back(jb);
    }
    manifest["bands"] = bands;
    manifest["band_misses"] = misses;
    manifest["files"] = r.files;
    write_json(out / "manifest.json", manifest);
  }
  return r;
}

std::vector<std::string> check_bands(const ExperimentPreset& p, const RunOutcome& r) {
  std::vector<std::string> misses;
  for (const auto& b : p.expect) {
    std::ostringstream msg;
    msg << p.name << " event " << b.event << " band [" << format_double(b.lo) << ", "
        << format_double(b.hi) << "]: ";
    if (b.event > r.events.size()) {
      msg << "no such event before t = "
          << format_double(r.records.empty() ? 0.0 : r.records.back().t);
      misses.push_back(msg.str());
      continue;
    }
    const double t = r.events[b.event - 1].t;
    if (!(t >= b.lo && t <= b.hi)) {
      msg << "t = " << format_double(t);
      misses.push_back(msg.str());
    }
  }
  return misses;
}

// ---------------------------------------------------------------- families

namespace {

ExperimentPreset two_layer_base(double theta) {
  ExperimentPreset p;
  p.flux_kind = FluxKind::rational;
  p.alpha = 1.0;
  p.theta = theta;
  p.epsilon = 0.1;
  p.a = -2.0;
  p.b = 2.0;
  p.cells = 1024;
  p.datum.kind = DatumKind::layers;
  p.datum.start_value = -1.0;
  p.datum.points = {-0.5, 0.5};
  p.horizon = 1e10;
  return p;
}

}  // namespace

std::vector<std::string> builtin_family_names() { return {"law-d", "law-eps2", "law-eps4"}; }

FamilySpec builtin_family(const std::string& name) {
  FamilySpec f;
  f.name = name;
  if (name == "law-d") {
    f.base = two_layer_base(2.0);
    f.axis = FamilyAxis::distance;
    f.values = {0.8, 1.0, 1.2};
  } else if (name == "law-eps2") {
    f.base = two_layer_base(2.0);
    f.base.datum.points = {-0.4, 0.4};
    f.axis = FamilyAxis::epsilon;
    f.values = {0.08, 0.1, 0.12};
  } else if (name == "law-eps4") {
    f.base = two_layer_base(4.0);
    f.axis = FamilyAxis::epsilon;
    f.values = {0.08, 0.1, 0.12};
  } else {
    throw ConfigError("family: unknown name '" + name + "'");
  }
  f.base.name = name;
  return f;
}

FamilySpec family_from_config(const Config& c) {
  FamilySpec f;
  if (c.has("family.base")) {
    f = builtin_family(c.at("family.base"));
  }
  Config rest;
  for (const auto& [k, v] : c.entries) {
    if (k == "family.axis") {
      if (v == "epsilon") {
        f.axis = FamilyAxis::epsilon;
      } else if (v == "distance") {
        f.axis = FamilyAxis::distance;
      } else {
        throw ConfigError("family.axis: expected epsilon or distance, got '" + v + "'");
      }
    } else if (k == "family.values") {
      f.values = to_list(k, v);
    } else if (k == "family.threads") {
      const auto n = to_integer(k, v);
      if (n < 0) throw ConfigError("family.threads: must be >= 0");
      f.threads = static_cast<unsigned>(n);
    } else if (k == "family.base") {
      continue;
    } else if (starts_with(k, "family.")) {
      throw ConfigError(k + ": unknown key");
    } else {
      rest.set(k, v);
    }
  }
  if (rest.has("base")) {
    f.base = preset_from_config(rest);
  } else if (!rest.entries.empty()) {
    // Preset keys are applied on top of the family's base preset.
    Config merged = preset_to_config(f.base);
    for (const auto& [k, v] : rest.entries) merged.set(k, v);
    f.base = preset_from_config(merged);
  }
  if (f.name.empty()) f.name = f.base.name;
  if (f.values.size() < 3) throw ConfigError("family.values: need at least 3 members");
  return f;
}

ExperimentPreset family_member(const FamilySpec& f, double value) {
  ExperimentPreset p = f.base;
  std::ostringstream name;
  if (f.axis == FamilyAxis::epsilon) {
    p.epsilon = value;
    name << f.name << "/eps=" << format_double(value);
  } else {
    p.datum.kind = DatumKind::layers;
    p.datum.points = {-0.5 * value, 0.5 * value};
    name << f.name << "/d=" << format_double(value);
  }
  p.name = name.str();
  p.expect.clear();
  return p;
}

namespace {

// Refined time of the first collapse, or +inf when none occurs.
double first_collapse(const ExperimentPreset& p) {
  p.validate();
  const auto m = model_of(p);
  const auto u0 = initial_datum(p, m);
  const std::size_t n0 = zeros_of(u0).size();
  EvolveOptions eo;
  eo.converge_exit = p.converge_exit;
  eo.observer = [n0](const State&, const DiagnosticsRecord& rec) { return rec.n_zeros < n0; };
  const auto res = evolve(m, p.stepper, u0, p.horizon,
                          geometric_checkpoints(std::min(p.checkpoint_first, p.horizon),
                                                p.horizon, p.checkpoint_ratio),
                          eo);
  if (res.records.back().n_zeros >= n0) return std::numeric_limits<double>::infinity();
  const auto ev = p.refine_events ? collapse_times(m, p.stepper, res) : collapse_times(res.records);
  return ev.front().t;
}

}  // namespace

TimingLaw timing_law(const FamilySpec& f) {
  if (f.values.size() < 3) throw DomainError("timing_law needs at least 3 family members");
  const std::size_t n = f.values.size();
  std::vector<ExperimentPreset> members;
  for (double v : f.values) members.push_back(family_member(f, v));
  for (const auto& m : members) m.validate();

  std::vector<double> times(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        times[i] = first_collapse(members[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = f.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                    : f.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (!std::isfinite(times[i])) {
      throw InsufficientEventsError(members[i].name + ": no collapse before t = " +
                                    format_double(members[i].horizon));
    }
  }

  TimingLaw law;
  law.values = f.values;
  law.t = times;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = f.values[i];
    if (f.axis == FamilyAxis::distance) {
      law.x.push_back(v);
    } else if (f.base.theta == 2.0) {
      law.x.push_back(1.0 / v);
    } else {
      law.x.push_back(std::log(1.0 / v));
    }
    y.push_back(std::log(times[i]));
  }
  law.x_label = f.axis == FamilyAxis::distance ? "d"
                : f.base.theta == 2.0          ? "1/eps"
                                               : "ln(1/eps)";
  law.fit = fit_line(law.x, y);
  return law;
}

void write_timing_law(const std::string& out_dir, const TimingLaw& law) {
  fs::create_directories(out_dir);
  std::ofstream m(fs::path(out_dir) / "timing_law.csv", std::ios::binary);
  m << "value,x,t,ln_t\n";
  for (std::size_t i = 0; i < law.t.size(); ++i) {
    m << format_double(law.values[i]) << ',' << format_double(law.x[i]) << ','
      << format_double(law.t[i]) << ',' << format_double(std::log(law.t[i])) << '\n';
  }
  std::ofstream f(fs::path(out_dir) / "timing_fit.csv", std::ios::binary);
  f << "x,slope,intercept,r2\n"
    << law.x_label << ',' << format_double(law.fit.slope) << ','
    << format_double(law.fit.intercept) << ',' << format_double(law.fit.r2) << '\n';
}

KSequence k_sequence(double theta, std::size_t j) {
  if (!(theta > 2.0)) throw DomainError("k_sequence needs theta > 2");
  if (j < 1) throw DomainError("k_sequence needs j >= 1");
  KSequence s;
  s.alpha = 0.5 + 1.0 / theta;
  s.beta = (theta + 2.0) / (theta - 2.0);
  double sum = 0.0, pw = 1.0;
  for (std::size_t m = 1; m <= j; ++m) {
    pw *= s.alpha;
    sum += pw;
    s.k.push_back(sum);
  }
  return s;
}

}  // namespace pmlab
