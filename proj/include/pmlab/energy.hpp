#pragma once

// Discrete energy E[u] = int Q~(eps^2 u_x)/eps^3 + F(u)/eps, the transition
// constants c_eps and c_0, and L1 distances to layered step functions.

#include <cstddef>
#include <vector>

#include "pmlab/inversion.hpp"
#include "pmlab/model.hpp"
#include "pmlab/profile.hpp"

namespace pmlab {

struct EnergyBreakdown {
  double total = 0.0;
  double gradient_part = 0.0;
  double potential_part = 0.0;
  /// Gradient plus potential contribution of each cell, when requested.
  std::vector<double> per_cell;
};

/// Gradient term with the one-sided difference per cell, potential term by
/// the trapezoid rule on the nodes.
EnergyBreakdown energy(const ModelParams& m, const Profile& u, bool with_cells = false);

/// Same quadrature on raw node values with spacing h.
double energy_total(const ModelParams& m, const std::vector<double>& u, double h);

/// c_eps = eps^-1 int_{-1}^{1} Q(eps^2 J_eps(F(s))) ds.
double c_eps(const ModelParams& m);

/// c_0 = sqrt(Q'(0)) int_{-1}^{1} sqrt(2 F(s)) ds.
double c0(const ModelParams& m);

struct InequalityReport {
  double min_value = 0.0;
  double argmin_x = 0.0;
  double argmin_y = 0.0;
  /// max |g(J(y), y)| over the sampled y.
  double max_abs_on_curve = 0.0;
  std::size_t samples = 0;
};

/// Samples g(x, y) = Q~(eps^2 x) + eps^2 y - eps^2 |x| Q(eps^2 J(y)) on a
/// samples x samples grid over [-kappa eps^-2, kappa eps^-2] x [0, ell eps^-2].
InequalityReport verify_pointwise_inequality(const InversionContext& ctx,
                                             std::size_t samples);

double inequality_g(const InversionContext& ctx, double x, double y);

/// int_a^b |u - w| with u piecewise linear and w either another profile on
/// the same grid or a step function (cells are split at its jumps).
double l1_distance(const Profile& u, const Profile& w);
double l1_distance(const Profile& u, const StepFunction& w);

}  // namespace pmlab
