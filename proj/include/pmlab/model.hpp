#pragma once

// Flux Q and double-well potential F of u_t = Q(eps^2 u_x)_x - F'(u),
// together with the scalar constants derived from them.

#include <string>

namespace pmlab {

enum class FluxKind { rational, gaussian };

/// Closed-form Perona-Malik flux, optionally scaled by alpha:
///   rational: Q(s) = alpha s / (1 + s^2)
///   gaussian: Q(s) = alpha s exp(-s^2)
/// Both are odd, increase on (-kappa, kappa) and decrease beyond.
class FluxSpec {
 public:
  static FluxSpec rational(double alpha = 1.0);
  static FluxSpec gaussian(double alpha = 1.0);

  FluxKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  bool scaled() const { return alpha_ != 1.0; }
  std::string name() const;

  double q(double s) const;
  double q_prime(double s) const;
  /// Antiderivative of q with q_tilde(0) = 0.
  double q_tilde(double s) const;

  /// Argmax of Q on [0, inf).
  double kappa() const { return kappa_; }
  /// kappa Q(kappa) - Q~(kappa).
  double ell() const { return ell_; }
  /// Maximum of Q' on [-kappa, kappa]; equals Q'(0) for both prototypes.
  double q_max_slope() const { return q_prime0_; }
  double q_prime0() const { return q_prime0_; }

 private:
  FluxSpec(FluxKind kind, double alpha);

  FluxKind kind_;
  double alpha_;
  double kappa_;
  double ell_;
  double q_prime0_;
};

struct FluxConstants {
  double kappa;
  double ell;
  double q_max_slope;
  double q_prime0;
};

FluxConstants derived_constants(const FluxSpec& flux);

/// F(u) = |1 - u^2|^theta / (2 theta) with near-well sandwich constants
/// (lambda1/theta)|1 -+ u|^theta <= F(u) <= (lambda2/theta)|1 -+ u|^theta
/// on the window |u -+ 1| < eta.
class PotentialSpec {
 public:
  /// Computes lambda1, lambda2 by scanning the window of half-width eta.
  static PotentialSpec double_well(double theta, double eta = 0.1);

  double theta() const { return theta_; }
  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  double eta() const { return eta_; }

  double value(double u) const;
  double derivative(double u) const;
  /// Clamped to a finite value where it blows up (theta < 2, u = +-1).
  double second_derivative(double u) const;

  /// F(+-(1 - w)) evaluated without forming 1 - w; w is the distance to the
  /// well, valid for 0 <= w <= 2.
  double near_well(double w) const;

  /// F(level - d) - F(level) for 0 <= d <= 2 level, 0 < level < 1, evaluated
  /// without cancellation when d is small.
  double drop(double level, double d) const;

  /// max F on [-1, 1], located by golden-section search.
  double max_on_wells() const;

 private:
  PotentialSpec(double theta, double eta);

  double theta_;
  double lambda1_ = 0.0;
  double lambda2_ = 0.0;
  double eta_;
};

/// sqrt(ell / max_{[-1,1]} F).
double eps0_of(const FluxSpec& flux, const PotentialSpec& potential);

struct ModelParams {
  double epsilon;
  double a;
  double b;
  FluxSpec flux;
  PotentialSpec potential;

  double length() const { return b - a; }
  double eps2() const { return epsilon * epsilon; }
};

/// Fraction of eps0 that epsilon may reach without the override flag.
inline constexpr double kEpsMargin = 0.95;

/// Validates and assembles model parameters. Throws DomainError when
/// epsilon >= kEpsMargin * eps0 unless allow_large_epsilon is set, in which
/// case only epsilon < eps0 is required.
ModelParams make_model(double epsilon, double a, double b, FluxSpec flux,
                       PotentialSpec potential,
                       bool allow_large_epsilon = false);

}  // namespace pmlab
