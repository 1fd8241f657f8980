#include "pmlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pmlab/errors.hpp"

namespace pmlab {

FluxSpec::FluxSpec(FluxKind kind, double alpha) : kind_(kind), alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("flux scale alpha must be positive, got " +
                      std::to_string(alpha));
  }
  switch (kind_) {
    case FluxKind::rational:
      kappa_ = 1.0;
      // kappa Q(kappa) - Q~(kappa) = 1/2 - ln(2)/2
      ell_ = alpha_ * (0.5 - 0.5 * std::log(2.0));
      break;
    case FluxKind::gaussian:
      kappa_ = 1.0 / std::sqrt(2.0);
      // kappa^2 e^{-1/2} - (1 - e^{-1/2})/2 = e^{-1/2} - 1/2
      ell_ = alpha_ * (std::exp(-0.5) - 0.5);
      break;
  }
  q_prime0_ = alpha_;
}

FluxSpec FluxSpec::rational(double alpha) {
  return FluxSpec(FluxKind::rational, alpha);
}

FluxSpec FluxSpec::gaussian(double alpha) {
  return FluxSpec(FluxKind::gaussian, alpha);
}

std::string FluxSpec::name() const {
  const char* base = kind_ == FluxKind::rational ? "rational" : "gaussian";
  if (!scaled()) return base;
  std::ostringstream os;
  os.precision(17);
  os << "scaled(" << base << "," << alpha_ << ")";
  return os.str();
}

double FluxSpec::q(double s) const {
  switch (kind_) {
    case FluxKind::rational:
      return alpha_ * s / (1.0 + s * s);
    case FluxKind::gaussian:
      return alpha_ * s * std::exp(-s * s);
  }
  return 0.0;
}

double FluxSpec::q_prime(double s) const {
  const double s2 = s * s;
  switch (kind_) {
    case FluxKind::rational: {
      const double d = 1.0 + s2;
      return alpha_ * (1.0 - s2) / (d * d);
    }
    case FluxKind::gaussian:
      return alpha_ * (1.0 - 2.0 * s2) * std::exp(-s2);
  }
  return 0.0;
}

double FluxSpec::q_tilde(double s) const {
  const double s2 = s * s;
  switch (kind_) {
    case FluxKind::rational:
      return 0.5 * alpha_ * std::log1p(s2);
    case FluxKind::gaussian:
      return -0.5 * alpha_ * std::expm1(-s2);
  }
  return 0.0;
}

FluxConstants derived_constants(const FluxSpec& flux) {
  return {flux.kappa(), flux.ell(), flux.q_max_slope(), flux.q_prime0()};
}

PotentialSpec::PotentialSpec(double theta, double eta)
    : theta_(theta), eta_(eta) {}

PotentialSpec PotentialSpec::double_well(double theta, double eta) {
  if (!(theta > 1.0) || !std::isfinite(theta)) {
    throw DomainError("potential exponent theta must exceed 1, got " +
                      std::to_string(theta));
  }
  if (!(eta > 0.0 && eta < 1.0)) {
    throw DomainError("near-well window eta must lie in (0,1), got " +
                      std::to_string(eta));
  }
  PotentialSpec p(theta, eta);
  // Bracket F(u) / (|1 -+ u|^theta / theta) over both windows.
  constexpr int kSamples = 2001;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double well : {1.0, -1.0}) {
    for (int k = 0; k < kSamples; ++k) {
      const double w = -eta + 2.0 * eta * k / (kSamples - 1);
      if (w == 0.0) continue;
      const double u = well - well * w;
      const double ratio = p.value(u) / (std::pow(std::abs(w), theta) / theta);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  p.lambda1_ = lo;
  p.lambda2_ = hi;
  return p;
}

double PotentialSpec::value(double u) const {
  return std::pow(std::abs(1.0 - u * u), theta_) / (2.0 * theta_);
}

double PotentialSpec::derivative(double u) const {
  const double w = 1.0 - u * u;
  if (w == 0.0) return 0.0;
  return -u * w * std::pow(std::abs(w), theta_ - 2.0);
}

double PotentialSpec::second_derivative(double u) const {
  // F' = -u g(w), g(w) = sign(w)|w|^{theta-1}, w = 1 - u^2
  constexpr double kFloor = 1e-16;
  const double w = 1.0 - u * u;
  const double aw = std::max(std::abs(w), kFloor);
  const double g = (w >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(w), theta_ - 1.0);
  return -g + 2.0 * u * u * (theta_ - 1.0) * std::pow(aw, theta_ - 2.0);
}

double PotentialSpec::near_well(double w) const {
  return std::pow(std::abs(w * (2.0 - w)), theta_) / (2.0 * theta_);
}

double PotentialSpec::drop(double level, double d) const {
  const double base = 1.0 - level * level;
  const double rel = d * (2.0 * level - d) / base;
  return std::pow(base, theta_) / (2.0 * theta_) *
         std::expm1(theta_ * std::log1p(rel));
}

double PotentialSpec::max_on_wells() const {
  // Golden-section search for the maximum of F on [-1, 1].
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -1.0;
  double hi = 1.0;
  double c = hi - invphi * (hi - lo);
  double d = lo + invphi * (hi - lo);
  double fc = value(c);
  double fd = value(d);
  while (hi - lo > 1e-12) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - invphi * (hi - lo);
      fc = value(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + invphi * (hi - lo);
      fd = value(d);
    }
  }
  return std::max({fc, fd, value(0.5 * (lo + hi))});
}

double eps0_of(const FluxSpec& flux, const PotentialSpec& potential) {
  return std::sqrt(flux.ell() / potential.max_on_wells());
}

ModelParams make_model(double epsilon, double a, double b, FluxSpec flux,
                       PotentialSpec potential, bool allow_large_epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("epsilon must be positive, got " + std::to_string(epsilon));
  }
  if (!(a < b)) {
    throw DomainError("interval requires a < b");
  }
  const double e0 = eps0_of(flux, potential);
  const double limit = allow_large_epsilon ? e0 : kEpsMargin * e0;
  if (!(epsilon < limit)) {
    std::ostringstream os;
    os << "epsilon = " << epsilon << " is not below "
       << (allow_large_epsilon ? "eps0 = " : "0.95 * eps0 = ") << limit;
    throw DomainError(os.str());
  }
  return ModelParams{epsilon, a, b, std::move(flux), std::move(potential)};
}

}  // namespace pmlab
