#pragma once

// Layer bookkeeping: zeros, interfaces u^-1(K), Hausdorff distances between
// interfaces, collapse events and the exit time of the interface.

#include <cstddef>
#include <vector>

#include "pmlab/evolution.hpp"
#include "pmlab/model.hpp"
#include "pmlab/profile.hpp"

namespace pmlab {

/// Sign changes of the piecewise-linear interpolant. A node with
/// |u_i| < 1e-14 counts as one zero when its neighbours have opposite signs.
std::vector<double> zeros_of(const Profile& u);

/// Closed interval [lo, hi].
struct Band {
  double lo;
  double hi;
};

/// Finite union of closed intervals, excluding +-1.
struct ClosedSet {
  std::vector<Band> bands;
  bool contains(double v) const;
};

ClosedSet default_interface_set();  // [-0.9, 0.9]

/// Endpoints of the maximal sub-segments of the piecewise-linear u that lie
/// in K, sorted.
std::vector<double> interface(const Profile& u, const ClosedSet& k = default_interface_set());

/// Exact Hausdorff distance of two finite point sets. Throws EmptySetError
/// when either set is empty.
double hausdorff(const std::vector<double>& a, const std::vector<double>& b);

/// +-1 step function with separation r around each jump.
struct StepFunctionV {
  StepFunction v;
  double r;
};

/// Validates (h_i - r, h_i + r) disjoint and inside [a, b]; throws
/// GeometryError otherwise.
StepFunctionV make_step_function(double a, double b, std::vector<double> jumps,
                                 double start_value, double r);

struct CollapseEvent {
  double t;
  std::size_t zeros_before;
  std::size_t zeros_after;
  std::vector<double> positions;  // zeros right after the event
  /// Bracket [t_lo, t] that contains the event.
  double t_lo;
};

/// Drops of n_zeros between consecutive records, reported at the later
/// checkpoint.
std::vector<CollapseEvent> collapse_times(const std::vector<DiagnosticsRecord>& records);

/// Same events, each bracket narrowed below rel_width by re-running from the
/// stored snapshot with ten times finer checkpoints.
std::vector<CollapseEvent> collapse_times(const ModelParams& m, const StepperConfig& cfg,
                                          const EvolveResult& run, double rel_width = 0.01);

/// First time the Hausdorff distance between the current interface and the
/// initial one exceeds delta1 (an empty interface counts as exit). Returns
/// +infinity when this does not happen before the horizon.
double t_eps_exit(const ModelParams& m, const StepperConfig& cfg, const Profile& u0,
                  double delta1, const ClosedSet& k, double horizon,
                  double checkpoint_ratio = 1.05, double rel_width = 0.01);

}  // namespace pmlab
