#pragma once

// Stationary solutions from the first-order reduction u' = J_eps(F(u)):
// standing waves, compactons (theta < 2), layered data glued from waves, and
// the periodic family used for N equidistant zeros.

#include <optional>
#include <vector>

#include "pmlab/inversion.hpp"
#include "pmlab/model.hpp"
#include "pmlab/profile.hpp"

namespace pmlab {

enum class DecayRegime { contact, exponential, algebraic };

const char* regime_name(DecayRegime r);

struct WaveReport {
  DecayRegime regime;
  /// Contact points x(1-) and x(-1+); present iff theta < 2.
  std::optional<double> x1;
  std::optional<double> x2;
  /// 1 - Phi ~ c1 exp(-c2 x) (exponential) or d1 x^-d2 (algebraic), fitted
  /// where 1 - Phi lies in [1e-6, 1e-1]. Stored as (coefficient, rate).
  std::optional<std::pair<double, double>> decay_fit;
};

/// Increasing standing wave Phi_eps on the whole line, tabulated once from
/// x(u) = int_0^u ds / J_eps(F(s)) and evaluated by monotone cubic Hermite
/// interpolation of the inverse map.
class StandingWave {
 public:
  explicit StandingWave(const ModelParams& m);

  double operator()(double x) const;
  /// Phi'(x) = J_eps(F(Phi(x))).
  double slope(double x) const;

  const WaveReport& report() const { return report_; }
  /// Half-widths of the transition: Phi = -1 for x <= -left_extent() and
  /// Phi = 1 for x >= right_extent(). Infinite for theta >= 2.
  double right_extent() const;
  double left_extent() const;

  /// Table of (x, u) pairs used by the interpolant, increasing in x.
  const std::vector<double>& table_x() const { return xs_; }
  const std::vector<double>& table_u() const { return us_; }

 private:
  InversionContext ctx_;
  PotentialSpec potential_;
  std::vector<double> xs_;
  std::vector<double> us_;
  std::vector<double> dudx_;
  WaveReport report_;
};

std::pair<Profile, WaveReport> standing_wave(const ModelParams& m,
                                             std::size_t n_points);

/// Psi(x) = Phi(-x).
std::pair<Profile, WaveReport> standing_wave_decreasing(const ModelParams& m,
                                                        std::size_t n_points);

/// Layers at h_1 < ... < h_N with value start_value at x = a, so -1 selects
/// the solution that rises through h_1. Piece j is Phi(+-(x - h_j)) between
/// the midpoints around h_j. Requires theta in (1, 2) and compact layers that
/// fit without overlap; throws GeometryError naming the first violated
/// constraint.
Profile compacton(const ModelParams& m, const std::vector<double>& zeros,
                  double start_value, std::size_t n_points);

/// Same gluing for any theta; the result is stationary only when the layers
/// are compact and separated. Used as an initial datum.
Profile transition_layer_datum(const ModelParams& m, const std::vector<double>& zeros,
                               std::size_t n_points, double start_value = -1.0);

/// Half period T(s) = int_{-s}^{s} du / J_eps(F(u) - F(s)), s in (0, 1).
double period_T(const ModelParams& m, double sbar);

/// Leading-order half period eps sqrt(Q'(0)/2) int_{-s}^{s} du/sqrt(F(u)-F(s)).
double period_T_leading(const ModelParams& m, double sbar);

/// s in (0, 1) with period_T(s) = (b - a) / N to 1e-8 relative.
double solve_sbar(const ModelParams& m, int n_zeros);

/// Periodic stationary solution on [a, b] with N equidistant zeros, rising
/// from -sbar at x = a.
Profile periodic_profile(const ModelParams& m, int n_zeros, std::size_t n_points);

/// Amplitude and half period of the profile built by periodic_profile.
struct PeriodicInfo {
  double sbar;
  double half_period;
  std::vector<double> zeros;
};
PeriodicInfo periodic_info(const ModelParams& m, int n_zeros);

}  // namespace pmlab
