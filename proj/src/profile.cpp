#include "pmlab/profile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "pmlab/errors.hpp"

namespace pmlab {

double Profile::x(std::size_t i) const {
  if (i == cells()) return b;
  return a + static_cast<double>(i) * h();
}

Profile sample_profile(double a, double b, std::size_t n_points,
                       const std::function<double(double)>& f, std::string meta) {
  if (n_points < 2) throw DomainError("a profile needs at least two nodes");
  if (!(a < b)) throw DomainError("profile interval requires a < b");
  Profile p{a, b, std::vector<double>(n_points), std::move(meta)};
  for (std::size_t i = 0; i < n_points; ++i) p.u[i] = f(p.x(i));
  return p;
}

double StepFunction::operator()(double x) const {
  const auto k = std::upper_bound(jumps.begin(), jumps.end(), x) - jumps.begin();
  return (k % 2 == 0) ? start_value : -start_value;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_profile_csv(const std::string& path, const Profile& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "x,u\n";
  for (std::size_t i = 0; i < p.nodes(); ++i) {
    out << format_double(p.x(i)) << ',' << format_double(p.u[i]) << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(where + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

}  // namespace

Profile read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "x,u") throw Error(path + ": expected header 'x,u'");
  std::vector<double> xs;
  Profile p;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(path + ":" + std::to_string(row) + ": missing comma");
    }
    const std::string where = path + ":" + std::to_string(row);
    xs.push_back(parse_double(line.substr(0, comma), where));
    p.u.push_back(parse_double(line.substr(comma + 1), where));
  }
  if (xs.size() < 2) throw Error(path + ": fewer than two rows");
  p.a = xs.front();
  p.b = xs.back();
  const double h = p.h();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (std::abs(xs[i] - p.x(i)) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw Error(path + ": grid is not uniform at row " + std::to_string(i + 2));
    }
  }
  p.meta = "csv:" + path;
  return p;
}

}  // namespace pmlab
