#include "pmlab/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pmlab/errors.hpp"
#include "pmlab/fit.hpp"
#include "quadrature.hpp"

namespace pmlab {

namespace {

using detail::gk_adaptive;
using detail::gk_rule;

constexpr int kContactPieces = 2000;
constexpr int kDecayPieces = 1500;
// Distance to the well at which the tabulated wave stops for theta >= 2.
constexpr double kTailCut = 1e-18;

template <class F>
double gk15(F f, double lo, double hi, double& err) {
  return gk_rule<15>(f, lo, hi, err);
}

// Cubic Hermite interpolation on increasing xs with the Fritsch-Carlson
// limiter applied to the given slopes.
double hermite_eval(const std::vector<double>& xs, const std::vector<double>& us,
                    const std::vector<double>& ms, double x) {
  if (x <= xs.front()) return us.front();
  if (x >= xs.back()) return us.back();
  const auto k = static_cast<std::size_t>(
      std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1);
  const double dx = xs[k + 1] - xs[k];
  const double du = us[k + 1] - us[k];
  if (du == 0.0 || dx == 0.0) return us[k];
  const double delta = du / dx;
  double m0 = ms[k];
  double m1 = ms[k + 1];
  const double al = m0 / delta;
  const double be = m1 / delta;
  const double r = al * al + be * be;
  if (r > 9.0) {
    const double tau = 3.0 / std::sqrt(r);
    m0 = tau * al * delta;
    m1 = tau * be * delta;
  }
  const double t = (x - xs[k]) / dx;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * us[k] + (t3 - 2 * t2 + t) * dx * m0 +
         (-2 * t3 + 3 * t2) * us[k + 1] + (t3 - t2) * dx * m1;
}

std::vector<double> glue_signs(std::size_t n, double start_value) {
  std::vector<double> s(n);
  double sign = start_value < 0.0 ? 1.0 : -1.0;
  for (auto& v : s) {
    v = sign;
    sign = -sign;
  }
  return s;
}

void check_zero_list(const ModelParams& m, const std::vector<double>& zeros) {
  if (zeros.empty()) throw GeometryError("zero list is empty");
  for (std::size_t i = 1; i < zeros.size(); ++i) {
    if (!(zeros[i] > zeros[i - 1])) {
      throw GeometryError("zeros must be strictly increasing (h_" + std::to_string(i) +
                          " >= h_" + std::to_string(i + 1) + ")");
    }
  }
  if (!(zeros.front() > m.a)) throw GeometryError("h_1 must exceed a");
  if (!(zeros.back() < m.b)) throw GeometryError("h_N must be below b");
}

Profile glue(const ModelParams& m, const StandingWave& wave,
             const std::vector<double>& zeros, double start_value,
             std::size_t n_points, std::string meta) {
  const std::size_t n = zeros.size();
  const auto signs = glue_signs(n, start_value);
  std::vector<double> mids;
  for (std::size_t j = 0; j + 1 < n; ++j) mids.push_back(0.5 * (zeros[j] + zeros[j + 1]));
  return sample_profile(
      m.a, m.b, n_points,
      [&](double x) {
        const auto j = static_cast<std::size_t>(
            std::lower_bound(mids.begin(), mids.end(), x) - mids.begin());
        return wave(signs[j] * (x - zeros[j]));
      },
      std::move(meta));
}

std::string describe_zeros(const std::vector<double>& zeros) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < zeros.size(); ++i) os << (i ? ";" : "") << zeros[i];
  return os.str();
}

}  // namespace

const char* regime_name(DecayRegime r) {
  switch (r) {
    case DecayRegime::contact:
      return "contact";
    case DecayRegime::exponential:
      return "exponential";
    case DecayRegime::algebraic:
      return "algebraic";
  }
  return "?";
}

StandingWave::StandingWave(const ModelParams& m) : ctx_(m), potential_(m.potential) {
  const double theta = potential_.theta();
  const double e0 = eps0_of(m.flux, potential_);
  if (!(m.epsilon < e0)) {
    throw DomainError("standing wave needs epsilon < eps0 = " + std::to_string(e0));
  }
  // One half of the table, u in [0, 1): distances to the well w and the
  // cumulative x(1 - w).
  std::vector<double> ws{1.0};
  std::vector<double> xh{0.0};
  if (theta < 2.0) {
    report_.regime = DecayRegime::contact;
    // w = r^p with r = 1 - tau makes the integrand bounded at the contact point.
    const double p = 2.0 / (2.0 - theta);
    const double limit = p * m.epsilon * std::sqrt(theta * m.flux.q_prime0()) /
                         std::pow(2.0, 0.5 * theta);
    auto g = [&](double r) {
      const double w = std::pow(r, p);
      if (w == 0.0) return limit;
      const double j = j_eps(ctx_, potential_.near_well(w));
      if (!(j > 0.0)) return limit;
      return p * std::pow(r, p - 1.0) / j;
    };
    double x = 0.0;
    double err_sum = 0.0;
    for (int k = 0; k < kContactPieces; ++k) {
      const double r_hi = 1.0 - static_cast<double>(k) / kContactPieces;
      const double r_lo = 1.0 - static_cast<double>(k + 1) / kContactPieces;
      double err = 0.0;
      x += gk15(g, r_lo, r_hi, err);
      err_sum += err;
      ws.push_back(k + 1 == kContactPieces ? 0.0 : std::pow(r_lo, p));
      xh.push_back(x);
    }
    if (!std::isfinite(x) || err_sum > 1e-8 * x) {
      throw QuadratureError("contact-point integral did not converge (error estimate " +
                            std::to_string(err_sum) + ")");
    }
  } else {
    report_.regime = theta == 2.0 ? DecayRegime::exponential : DecayRegime::algebraic;
    // w = exp(-sigma); integrand w / J(F) is bounded (theta = 2) or grows
    // like w^{1 - theta/2}.
    const double sigma_max = -std::log(kTailCut);
    auto g = [&](double sigma) {
      const double w = std::exp(-sigma);
      return w / j_eps(ctx_, potential_.near_well(w));
    };
    double x = 0.0;
    for (int k = 0; k < kDecayPieces; ++k) {
      const double lo = sigma_max * k / kDecayPieces;
      const double hi = sigma_max * (k + 1) / kDecayPieces;
      if (!(j_eps(ctx_, potential_.near_well(std::exp(-hi))) > 0.0)) break;
      double err = 0.0;
      const double dx = gk15(g, lo, hi, err);
      if (!std::isfinite(dx)) break;
      x += dx;
      ws.push_back(std::exp(-hi));
      xh.push_back(x);
    }
  }

  // Mirror to the full table; F is even, so x(-u) = -x(u).
  const std::size_t n = ws.size();
  xs_.resize(2 * n - 1);
  us_.resize(2 * n - 1);
  dudx_.resize(2 * n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = 1.0 - ws[k];
    const double slope = ws[k] == 0.0 ? 0.0 : j_eps(ctx_, potential_.near_well(ws[k]));
    xs_[n - 1 + k] = xh[k];
    us_[n - 1 + k] = u;
    dudx_[n - 1 + k] = slope;
    xs_[n - 1 - k] = -xh[k];
    us_[n - 1 - k] = -u;
    dudx_[n - 1 - k] = slope;
  }

  if (report_.regime == DecayRegime::contact) {
    report_.x1 = xh.back();
    report_.x2 = -xh.back();
  } else {
    std::vector<double> fx, fy;
    for (std::size_t k = 0; k < n; ++k) {
      if (ws[k] >= 1e-6 && ws[k] <= 1e-1) {
        fx.push_back(report_.regime == DecayRegime::exponential ? xh[k] : std::log(xh[k]));
        fy.push_back(std::log(ws[k]));
      }
    }
    if (fx.size() >= 2) {
      const auto f = fit_line(fx, fy);
      report_.decay_fit = std::make_pair(std::exp(f.intercept), -f.slope);
    }
  }
}

double StandingWave::operator()(double x) const {
  // Odd by construction, so the two halves agree to the last bit.
  if (x < 0.0) return -(*this)(-x);
  if (report_.regime == DecayRegime::contact) {
    if (x >= xs_.back()) return 1.0;
    if (x <= xs_.front()) return -1.0;
  }
  return hermite_eval(xs_, us_, dudx_, x);
}

double StandingWave::slope(double x) const {
  const double u = (*this)(x);
  const double w = 1.0 - std::abs(u);
  if (w <= 0.0) return 0.0;
  return j_eps(ctx_, potential_.near_well(w));
}

double StandingWave::right_extent() const {
  return report_.x1 ? *report_.x1 : std::numeric_limits<double>::infinity();
}

double StandingWave::left_extent() const {
  return report_.x2 ? -*report_.x2 : std::numeric_limits<double>::infinity();
}

std::pair<Profile, WaveReport> standing_wave(const ModelParams& m, std::size_t n_points) {
  StandingWave wave(m);
  auto p = sample_profile(m.a, m.b, n_points, [&](double x) { return wave(x); },
                          "standing_wave");
  return {std::move(p), wave.report()};
}

std::pair<Profile, WaveReport> standing_wave_decreasing(const ModelParams& m,
                                                        std::size_t n_points) {
  StandingWave wave(m);
  auto p = sample_profile(m.a, m.b, n_points, [&](double x) { return wave(-x); },
                          "standing_wave_decreasing");
  return {std::move(p), wave.report()};
}

Profile compacton(const ModelParams& m, const std::vector<double>& zeros,
                  double start_value, std::size_t n_points) {
  const double theta = m.potential.theta();
  if (!(theta > 1.0 && theta < 2.0)) {
    throw DomainError("compactons exist only for theta in (1, 2)");
  }
  if (zeros.empty()) throw GeometryError("zero list is empty");
  for (std::size_t i = 1; i < zeros.size(); ++i) {
    if (!(zeros[i] > zeros[i - 1])) {
      throw GeometryError("zeros must be strictly increasing");
    }
  }
  StandingWave wave(m);
  const auto signs = glue_signs(zeros.size(), start_value);
  auto left_of = [&](std::size_t j) {
    return signs[j] > 0 ? wave.left_extent() : wave.right_extent();
  };
  auto right_of = [&](std::size_t j) {
    return signs[j] > 0 ? wave.right_extent() : wave.left_extent();
  };
  std::ostringstream os;
  os.precision(10);
  if (!(m.a < zeros.front() - left_of(0))) {
    os << "left boundary: need a < h_1 - L_1, got h_1 - L_1 = " << zeros.front() - left_of(0)
       << " with a = " << m.a;
    throw GeometryError(os.str());
  }
  for (std::size_t j = 0; j + 1 < zeros.size(); ++j) {
    const double need = right_of(j) + left_of(j + 1);
    const double gap = zeros[j + 1] - zeros[j];
    if (!(gap > need)) {
      os << "gap " << j + 1 << ": need h_" << j + 2 << " - h_" << j + 1 << " > " << need
         << ", got " << gap;
      throw GeometryError(os.str());
    }
  }
  const std::size_t last = zeros.size() - 1;
  if (!(zeros.back() + right_of(last) < m.b)) {
    os << "right boundary: need h_N + R_N < b, got " << zeros.back() + right_of(last)
       << " with b = " << m.b;
    throw GeometryError(os.str());
  }
  return glue(m, wave, zeros, start_value, n_points,
              "compacton:" + describe_zeros(zeros));
}

Profile transition_layer_datum(const ModelParams& m, const std::vector<double>& zeros,
                               std::size_t n_points, double start_value) {
  check_zero_list(m, zeros);
  StandingWave wave(m);
  return glue(m, wave, zeros, start_value, n_points,
              "transition_layers:" + describe_zeros(zeros));
}

namespace {

void check_sbar(double sbar) {
  if (!(sbar > 0.0 && sbar < 1.0)) {
    throw DomainError("s-bar must lie in (0, 1), got " + std::to_string(sbar));
  }
}

// Integrand of the half period after u = +-(sbar - t^2), t in [0, sqrt(sbar)].
struct PeriodIntegrand {
  const InversionContext& ctx;
  const PotentialSpec& pot;
  double sbar;
  double operator()(double t) const {
    const double d = t * t;
    const double drop = pot.drop(sbar, d);
    const double j = j_eps(ctx, drop);
    if (j > 0.0) return 2.0 * t / j;
    // t so small that the drop underflows: use J ~ sqrt(2 drop / (eps^2 Q'(0)))
    // with drop ~ -F'(sbar) t^2.
    const double slope = -pot.derivative(sbar);
    return 2.0 * ctx.epsilon() * std::sqrt(ctx.flux().q_prime0() / (2.0 * slope));
  }
};

// Breakpoints on [0, sqrt(sbar)] refined geometrically towards t = 0, where
// the integrand varies on the scale sqrt(1 - sbar).
std::vector<double> period_breaks(double sbar, int uniform) {
  const double top = std::sqrt(sbar);
  std::vector<double> br;
  for (int k = 0; k <= uniform; ++k) br.push_back(top * k / uniform);
  const double scale = std::sqrt(1.0 - sbar);
  for (int k = -60; k <= 40; ++k) {
    const double t = scale * std::pow(10.0, k / 20.0);
    if (t < top) br.push_back(t);
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

template <class F>
double rough_integral(F& g, const std::vector<double>& br) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double err = 0.0;
    total += gk_rule<15>(g, br[k], br[k + 1], err);
  }
  return total;
}

}  // namespace

double period_T(const ModelParams& m, double sbar) {
  check_sbar(sbar);
  InversionContext ctx(m);
  if (m.potential.value(0.0) - m.potential.value(sbar) > ctx.xi_max()) {
    throw DomainError("period_T: F(0) - F(sbar) exceeds the range of J_eps");
  }
  PeriodIntegrand g{ctx, m.potential, sbar};
  const auto br = period_breaks(sbar, 8);
  const double tol = 1e-13 * rough_integral(g, br) / static_cast<double>(br.size());
  double total = 0.0;
  double err_total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double err = 0.0;
    // J_eps is only accurate to its root tolerance; do not chase that noise.
    total += gk_adaptive(g, br[k], br[k + 1], tol, 30, err, 10.0 * ctx.root_tol());
    err_total += err;
  }
  if (!std::isfinite(total) || err_total > 1e-10 * total) {
    throw QuadratureError("period integral did not converge at s-bar = " +
                          std::to_string(sbar));
  }
  // Both halves [-sbar, 0] and [0, sbar] give the same integral.
  return 2.0 * total;
}

double period_T_leading(const ModelParams& m, double sbar) {
  check_sbar(sbar);
  const auto& pot = m.potential;
  auto g = [&](double t) {
    const double drop = pot.drop(sbar, t * t);
    if (drop > 0.0) return 2.0 * t / std::sqrt(drop);
    return 2.0 / std::sqrt(-pot.derivative(sbar));
  };
  const auto br = period_breaks(sbar, 8);
  const double tol = 1e-13 * rough_integral(g, br) / static_cast<double>(br.size());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double err = 0.0;
    total += gk_adaptive(g, br[k], br[k + 1], tol, 30, err);
  }
  return m.epsilon * std::sqrt(0.5 * m.flux.q_prime0()) * 2.0 * total;
}

double solve_sbar(const ModelParams& m, int n_zeros) {
  if (n_zeros < 1) throw DomainError("solve_sbar needs N >= 1");
  const double target = m.length() / n_zeros;
  auto residual = [&](double w) { return period_T(m, 1.0 - w) - target; };

  // Probe near the small-amplitude limit, then walk towards s-bar = 1.
  double w_lo = 1.0 - 1e-3;  // s-bar = 1e-3
  double r_lo = residual(w_lo);
  if (!(r_lo < 0.0)) {
    std::ostringstream os;
    os << "no periodic solution: half period at small amplitude is " << r_lo + target
       << " >= (b - a)/N = " << target << " (epsilon too large)";
    throw NoSolutionError(os.str());
  }
  double w_hi = 0.0;
  double r_hi = 0.0;
  bool found = false;
  for (int k = 1; k <= 15 && !found; ++k) {
    w_hi = std::pow(10.0, -k);
    r_hi = residual(w_hi);
    if (r_hi >= 0.0) {
      found = true;
    } else {
      w_lo = w_hi;
      r_lo = r_hi;
    }
  }
  if (!found) {
    throw NoSolutionError("no periodic solution: half period stays below (b - a)/N "
                          "for s-bar up to 1 - 1e-15");
  }
  // Bisection in log(1 - s-bar).
  const double tol = 1e-8 * target;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(r_lo) <= tol) return 1.0 - w_lo;
    if (std::abs(r_hi) <= tol) return 1.0 - w_hi;
    const double w_mid = std::sqrt(w_lo * w_hi);
    if (!(w_mid < w_lo && w_mid > w_hi)) break;
    const double r_mid = residual(w_mid);
    if (r_mid < 0.0) {
      w_lo = w_mid;
      r_lo = r_mid;
    } else {
      w_hi = w_mid;
      r_hi = r_mid;
    }
  }
  if (std::abs(r_lo) <= tol) return 1.0 - w_lo;
  if (std::abs(r_hi) <= tol) return 1.0 - w_hi;
  throw NoSolutionError("s-bar bisection stalled before reaching tolerance");
}

PeriodicInfo periodic_info(const ModelParams& m, int n_zeros) {
  PeriodicInfo info;
  info.sbar = solve_sbar(m, n_zeros);
  info.half_period = m.length() / n_zeros;
  for (int k = 0; k < n_zeros; ++k) {
    info.zeros.push_back(m.a + info.half_period * (0.5 + k));
  }
  return info;
}

Profile periodic_profile(const ModelParams& m, int n_zeros, std::size_t n_points) {
  const auto info = periodic_info(m, n_zeros);
  const double sbar = info.sbar;
  const double T = info.half_period;
  InversionContext ctx(m);
  PeriodIntegrand g{ctx, m.potential, sbar};

  // Quarter wave: u = -(sbar - t^2) from -sbar (x = 0) up to 0 (x = T/2).
  const auto br = period_breaks(sbar, 2000);
  std::vector<double> xs{0.0}, us{-sbar}, ms{0.0};
  double x = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double err = 0.0;
    x += gk15(g, br[k], br[k + 1], err);
    const double t = br[k + 1];
    const double d = t * t;
    xs.push_back(x);
    us.push_back(k + 2 == br.size() ? 0.0 : -(sbar - d));
    ms.push_back(j_eps(ctx, m.potential.drop(sbar, d)));
  }
  // Remove the small quadrature mismatch against the solved half period.
  const double scale = 0.5 * T / x;
  for (auto& v : xs) v *= scale;
  for (auto& v : ms) v /= scale;

  auto quarter = [&](double y) { return hermite_eval(xs, us, ms, y); };
  auto rise = [&](double y) {
    return y <= 0.5 * T ? quarter(y) : -quarter(T - y);
  };
  std::ostringstream meta;
  meta.precision(17);
  meta << "periodic:N=" << n_zeros << ";sbar=" << sbar;
  return sample_profile(
      m.a, m.b, n_points,
      [&](double xx) {
        double y = std::fmod(xx - m.a, 2.0 * T);
        if (y < 0.0) y += 2.0 * T;
        return y <= T ? rise(y) : rise(2.0 * T - y);
      },
      meta.str());
}

}  // namespace pmlab
