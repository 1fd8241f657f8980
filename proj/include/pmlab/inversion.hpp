#pragma once

#include "pmlab/model.hpp"

namespace pmlab {

/// Everything needed to evaluate P_eps and its inverse J_eps on
/// [0, kappa eps^-2] -> [0, ell eps^-2].
class InversionContext {
 public:
  InversionContext(double epsilon, FluxSpec flux, double root_tol = 1e-12);
  explicit InversionContext(const ModelParams& m, double root_tol = 1e-12)
      : InversionContext(m.epsilon, m.flux, root_tol) {}

  double epsilon() const { return eps_; }
  double eps2() const { return eps2_; }
  const FluxSpec& flux() const { return flux_; }
  double s_max() const { return s_max_; }
  double xi_max() const { return xi_max_; }
  double root_tol() const { return root_tol_; }

 private:
  double eps_;
  double eps2_;
  FluxSpec flux_;
  double s_max_;
  double xi_max_;
  double root_tol_;
};

/// P_eps(s) = s Q(eps^2 s) - eps^-2 Q~(eps^2 s). Even in s.
double p_eps(const InversionContext& ctx, double s);

/// Unique s in [0, s_max] with P_eps(s) = xi. Inputs within 1e-12 relative
/// above xi_max are clamped; anything else outside [0, xi_max] throws
/// DomainError.
double j_eps(const InversionContext& ctx, double xi);

/// Leading-order inverse sqrt(2 xi / (eps^2 Q'(0))).
double j_eps_asymptotic(const InversionContext& ctx, double xi);

}  // namespace pmlab
