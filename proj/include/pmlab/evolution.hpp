#pragma once

// Time integration of u_t = Q(eps^2 u_x)_x - F'(u) with zero boundary flux.
//
// Space: node-centred finite volumes with half control volumes at the two
// boundary nodes. With weights w_i (1 inside, 1/2 at the ends) the scheme is
//   w_i h du_i/dt = Q(eps^2 D_{i+1/2}) - Q(eps^2 D_{i-1/2}) - w_i h F'(u_i),
// which is exactly -eps dE/du_i for the discrete energy of energy.hpp, so
// dE/dt = -eps^-1 sum_i w_i h (du_i/dt)^2 holds on the semi-discrete level.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pmlab/model.hpp"
#include "pmlab/profile.hpp"

namespace pmlab {

enum class Scheme { explicit_adaptive, implicit_adaptive };
enum class BackwardPolicy { error, warn, clamp };

const char* scheme_name(Scheme s);
const char* policy_name(BackwardPolicy p);

struct StepperConfig {
  Scheme scheme = Scheme::implicit_adaptive;
  double dt_init = 1e-3;
  double dt_max = 1e6;
  double dt_min = 1e-12;
  /// Step cap while ||u_t||^2 is at least quiet_threshold.
  double dt_max_active = 10.0;
  double quiet_threshold = 1e-14;
  double newton_tol = 1e-10;
  int newton_max_iter = 30;
  /// Consecutive rejections allowed within one step before NewtonError.
  int max_halvings = 60;
  double energy_drift_tol = 1e-10;
  /// Largest nodal change accepted in one implicit step.
  double max_du = 0.02;
  /// Fraction of the explicit stability limit.
  double explicit_safety = 0.4;
  double growth = 1.2;
  int grow_after = 5;
  BackwardPolicy backward_policy = BackwardPolicy::warn;

  /// Throws DomainError when the fields are inconsistent.
  void validate() const;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t newton_iterations = 0;
  double last_dt = 0.0;
  /// Accepted steps ending with a cell in the backward regime.
  std::size_t backward_steps = 0;
  double first_backward_time = std::numeric_limits<double>::quiet_NaN();
  /// Running sum of eps^-1 dt ||du/dt||^2 over accepted steps.
  double dissipated = 0.0;
};

struct State {
  double t = 0.0;
  Profile u;
  StepStats stats;
  /// Step size to try next.
  double dt = 0.0;
  int consecutive_accepts = 0;
};

struct DiagnosticsRecord {
  double t = 0.0;
  double energy = 0.0;
  double ut_l2sq = 0.0;
  std::size_t n_zeros = 0;
  std::vector<double> zeros;
  /// max over cells of eps^2 |Delta u / h|.
  double max_grad = 0.0;
  double dissipated = 0.0;
};

/// du/dt at every node. Under the clamp policy the flux argument is cut at
/// +-kappa.
std::vector<double> rhs(const ModelParams& m, const std::vector<double>& u, double h,
                        BackwardPolicy policy = BackwardPolicy::warn);

/// sum_i w_i h v_i^2.
double weighted_l2sq(const std::vector<double>& v, double h);

double max_gradient(const ModelParams& m, const std::vector<double>& u, double h);

DiagnosticsRecord diagnose(const ModelParams& m, const StepperConfig& cfg, const State& s);

State initial_state(const StepperConfig& cfg, const Profile& u0, double t0 = 0.0);

/// Advances s by one accepted step of length at most dt_cap.
void step(const ModelParams& m, const StepperConfig& cfg, State& s,
          double dt_cap = std::numeric_limits<double>::infinity());

/// first, first r, first r^2, ... strictly below horizon, then horizon.
std::vector<double> geometric_checkpoints(double first, double horizon, double ratio = 1.05);

/// Return true to stop the run after this checkpoint.
using Observer = std::function<bool(const State&, const DiagnosticsRecord&)>;

struct EvolveResult {
  std::vector<DiagnosticsRecord> records;
  State final_state;
  /// For each checkpoint k whose zero count dropped, the state at k - 1.
  std::vector<State> event_snapshots;
  std::string stop_reason;  // "horizon", "converged" or "observer"
};

struct EvolveOptions {
  bool converge_exit = true;
  double converge_l1 = 1e-6;
  bool keep_event_snapshots = true;
  Observer observer;
};

/// Integrates from u0 at t = 0 to the horizon, recording at t = 0, at each
/// checkpoint (landed on exactly) and at the horizon.
EvolveResult evolve(const ModelParams& m, const StepperConfig& cfg, const Profile& u0,
                    double horizon, const std::vector<double>& checkpoints,
                    const EvolveOptions& opts = {});

EvolveResult evolve_from(const ModelParams& m, const StepperConfig& cfg, State s0,
                         double horizon, const std::vector<double>& checkpoints,
                         const EvolveOptions& opts = {});

}  // namespace pmlab
