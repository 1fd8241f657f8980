#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace pmlab {

/// Function sampled at the nodes x_i = a + i h, i = 0..n, of a uniform grid.
struct Profile {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> u;
  std::string meta;

  std::size_t nodes() const { return u.size(); }
  std::size_t cells() const { return u.empty() ? 0 : u.size() - 1; }
  double h() const { return (b - a) / static_cast<double>(cells()); }
  double x(std::size_t i) const;
};

/// Uniform grid with n_points nodes (n_points >= 2), values from f(x).
Profile sample_profile(double a, double b, std::size_t n_points,
                       const std::function<double(double)>& f,
                       std::string meta = {});

/// Piecewise-constant function with values +-1 switching sign at each jump.
struct StepFunction {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> jumps;
  double start_value = -1.0;

  double operator()(double x) const;
};

/// Two-column CSV (header "x,u"), shortest round-trip formatting, so that
/// read_profile_csv(write_profile_csv(p)) reproduces p.u bit for bit.
void write_profile_csv(const std::string& path, const Profile& p);
Profile read_profile_csv(const std::string& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace pmlab
