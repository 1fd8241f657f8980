#pragma once

// Experiment configuration, built-in presets, runs with CSV/JSON artifacts,
// timing-law families and the algebraic-law exponent sequence.
//
// Config text is flat "key = value" with dotted keys and '#' comments:
//
//   name = exp1
//   flux.kind = rational        # or gaussian
//   flux.alpha = 1
//   potential.theta = 2
//   model.epsilon = 0.1
//   model.a = -4
//   model.b = 4
//   grid.cells = 2048
//   init.kind = layers          # layers | compacton | perturbation | csv
//   init.points = -3.4, -2, 0, 0.9, 2.2, 3.2
//   run.horizon = 1e5
//   stepper.scheme = implicit
//   expect.event.1 = 2300, 21000

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmlab/evolution.hpp"
#include "pmlab/fit.hpp"
#include "pmlab/layers.hpp"
#include "pmlab/model.hpp"
#include "pmlab/profile.hpp"

namespace pmlab {

/// Ordered key/value store. Parsing rejects duplicate keys and lines without
/// '='; errors carry the line number.
struct Config {
  std::map<std::string, std::string> entries;

  bool has(const std::string& key) const;
  /// Throws ConfigError naming the key when it is missing.
  const std::string& at(const std::string& key) const;
  void set(const std::string& key, std::string value);
};

Config parse_config(std::string_view text);
Config load_config(const std::string& path);
std::string serialize_config(const Config& c);

enum class DatumKind { layers, compacton, perturbation, csv };

struct DatumSpec {
  DatumKind kind = DatumKind::layers;
  /// Layer positions (layers, compacton) or sign switches (perturbation).
  std::vector<double> points;
  /// Value at x = a: -1/+1 for layers, the sign of the first piece for
  /// perturbation.
  double start_value = -1.0;
  /// Perturbation amplitude u*.
  double amplitude = 0.01;
  std::string path;
};

/// Closed band [lo, hi] for the time of the k-th collapse event (1-based).
struct EventBand {
  std::size_t event = 1;
  double lo = 0.0;
  double hi = 0.0;
  /// Reference value quoted for the experiment, if any.
  double paper = 0.0;
};

struct ExperimentPreset {
  std::string name = "custom";
  FluxKind flux_kind = FluxKind::rational;
  double alpha = 1.0;
  double theta = 2.0;
  double eta = 0.1;
  double epsilon = 0.1;
  double a = -4.0;
  double b = 4.0;
  bool allow_large_epsilon = false;
  std::size_t cells = 2048;
  DatumSpec datum;
  double horizon = 1e5;
  double checkpoint_first = 0.1;
  double checkpoint_ratio = 1.05;
  /// Write a profile snapshot every this many checkpoints (0: none). The
  /// initial and final profiles are always written.
  std::size_t snapshot_every = 0;
  bool refine_events = true;
  bool converge_exit = true;
  StepperConfig stepper;
  std::vector<EventBand> expect;

  /// Throws ConfigError (field path in the message) or DomainError from the
  /// model constraints.
  void validate() const;
};

/// Starts from the built-in preset named by "base" (exp1 without its time
/// bands when absent) and applies the remaining keys. Unknown keys are
/// errors; "family.*" keys are left to family_from_config.
ExperimentPreset preset_from_config(const Config& c);
Config preset_to_config(const ExperimentPreset& p);

/// exp1, exp2-slow, exp2-fast, exp3, exp4a, exp4b. Throws ConfigError for
/// an unknown name.
ExperimentPreset builtin_preset(const std::string& name);
std::vector<std::string> builtin_preset_names();

ModelParams model_of(const ExperimentPreset& p);
Profile initial_datum(const ExperimentPreset& p, const ModelParams& m);

struct ModelConstants {
  double kappa = 0.0;
  double ell = 0.0;
  double q_prime0 = 0.0;
  double eps0 = 0.0;
  double c_eps = 0.0;
  double c0 = 0.0;
};
ModelConstants model_constants(const ModelParams& m);

enum class RunStatus { ok, numerical_failure };

struct RunOutcome {
  RunStatus status = RunStatus::ok;
  std::string error;
  std::vector<DiagnosticsRecord> records;
  std::vector<CollapseEvent> events;
  State final_state;
  std::string stop_reason;
  double wall_seconds = 0.0;
  /// Files written, relative to the output directory.
  std::vector<std::string> files;
};

struct RunOptions {
  /// Empty: keep everything in memory.
  std::string out_dir;
  bool seedless = false;
};

/// Builds the datum, evolves, refines the collapse events and, with an
/// output directory, writes manifest.json (before and after the run),
/// diagnostics.csv, events.csv and profile CSVs. Numerical failures are
/// caught, recorded in the manifest and returned with the partial records.
RunOutcome run(const ExperimentPreset& p, const RunOptions& opts = {});

/// Events whose band is missed (or that never happen). Empty means all
/// expectations hold.
std::vector<std::string> check_bands(const ExperimentPreset& p, const RunOutcome& r);

enum class FamilyAxis { epsilon, distance };

/// Members share the base preset and differ in epsilon or in the distance d
/// of two layers placed at +-d/2.
struct FamilySpec {
  std::string name;
  ExperimentPreset base;
  FamilyAxis axis = FamilyAxis::epsilon;
  std::vector<double> values;
  /// Runs in flight at once; 0 picks the hardware concurrency.
  unsigned threads = 1;
};

FamilySpec family_from_config(const Config& c);
/// law-d, law-eps2, law-eps4.
FamilySpec builtin_family(const std::string& name);
std::vector<std::string> builtin_family_names();

ExperimentPreset family_member(const FamilySpec& f, double value);

struct TimingLaw {
  std::vector<double> values;
  /// Regressor: d, 1/eps (theta = 2) or ln(1/eps) (theta > 2).
  std::vector<double> x;
  std::vector<double> t;
  LinearFit fit;  // ln t against x
  std::string x_label;
};

/// Runs every member, takes the refined first collapse time, and fits ln t.
/// Throws InsufficientEventsError when a member has no collapse before its
/// horizon.
TimingLaw timing_law(const FamilySpec& f);

/// Writes timing_law.csv (members) and timing_fit.csv (slope, intercept, r2).
void write_timing_law(const std::string& out_dir, const TimingLaw& law);

struct KSequence {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> k;  // k_1 .. k_j
};

/// k_j = sum_{m=1}^{j} alpha^m with alpha = 1/2 + 1/theta, and
/// beta = (theta + 2)/(theta - 2), the limit of k_j. theta > 2.
KSequence k_sequence(double theta, std::size_t j);

const char* datum_name(DatumKind k);
const char* status_name(RunStatus s);

}  // namespace pmlab
