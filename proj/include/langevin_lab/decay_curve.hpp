#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace langevin_lab {

/// R_q(law_t ‖ π) sampled at increasing times.
struct DecayCurve {
  double q = 2.0;
  std::vector<double> times;
  std::vector<double> values;
  /// Free-form header metadata (h, potential id, grid spec, ...).
  std::map<std::string, std::string> meta;

  std::size_t size() const { return times.size(); }
};

/// CSV with '#'-prefixed metadata lines, then columns t,R_q.
inline void write_csv(std::ostream& os, const DecayCurve& c) {
  os.precision(17);
  os << "# q=" << c.q << '\n';
  for (const auto& [k, v] : c.meta) os << "# " << k << '=' << v << '\n';
  os << "t,R_q\n";
  for (std::size_t i = 0; i < c.size(); ++i) os << c.times[i] << ',' << c.values[i] << '\n';
}

/// Least-squares line y = a + b x with coefficient of determination.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = x.size();
  if (f.n < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(f.n);
  my /= static_cast<double>(f.n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace langevin_lab
