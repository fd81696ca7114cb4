#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "gaussian_law.hpp"

namespace langevin_lab {

/// Cell masses on a regular 1D or 2D grid. In 2D, values are row-major with
/// the first axis slowest: values[i * n[1] + j].
struct GridDensity {
  int dims = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<std::size_t, 2> n{1, 1};
  std::vector<double> values;

  static GridDensity zeros_1d(double lo, double hi, std::size_t n) {
    detail::require(hi > lo && n >= 2, "grid needs hi > lo and at least two cells");
    GridDensity g;
    g.dims = 1;
    g.lo = {lo, 0.0};
    g.hi = {hi, 1.0};
    g.n = {n, 1};
    g.values.assign(n, 0.0);
    return g;
  }

  static GridDensity zeros_2d(std::array<double, 2> lo, std::array<double, 2> hi, std::array<std::size_t, 2> n) {
    detail::require(hi[0] > lo[0] && hi[1] > lo[1] && n[0] >= 2 && n[1] >= 2, "invalid 2D grid");
    GridDensity g;
    g.dims = 2;
    g.lo = lo;
    g.hi = hi;
    g.n = n;
    g.values.assign(n[0] * n[1], 0.0);
    return g;
  }

  std::size_t size() const { return values.size(); }
  double dx(int axis = 0) const { return (hi[axis] - lo[axis]) / static_cast<double>(n[axis]); }
  double center(int axis, std::size_t i) const { return lo[axis] + (static_cast<double>(i) + 0.5) * dx(axis); }
  double cell_volume() const { return dims == 1 ? dx(0) : dx(0) * dx(1); }
  double total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

  bool same_grid(const GridDensity& o) const {
    if (dims != o.dims || n[0] != o.n[0] || lo[0] != o.lo[0] || hi[0] != o.hi[0]) return false;
    return dims == 1 || (n[1] == o.n[1] && lo[1] == o.lo[1] && hi[1] == o.hi[1]);
  }

  /// Mass held by the outermost cells (both ends of every axis).
  double boundary_mass() const {
    if (dims == 1) return values.front() + values.back();
    double m = 0.0;
    const std::size_t nx = n[0], ny = n[1];
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j)
        if (i == 0 || j == 0 || i + 1 == nx || j + 1 == ny) m += values[i * ny + j];
    return m;
  }

  void normalize() {
    const double t = total();
    if (!(t > 0.0) || !std::isfinite(t)) throw grid_error("cannot normalize a grid density with total mass " + std::to_string(t));
    for (auto& v : values) v /= t;
  }

  /// First and second moments along an axis.
  double mean(int axis = 0) const {
    double m = 0.0;
    for_each_cell([&](std::size_t k, double x, double y) { m += values[k] * (axis == 0 ? x : y); });
    return m;
  }
  double variance(int axis = 0) const {
    const double m = mean(axis);
    double v = 0.0;
    for_each_cell([&](std::size_t k, double x, double y) {
      const double c = (axis == 0 ? x : y) - m;
      v += values[k] * c * c;
    });
    return v;
  }

  template <class F>
  void for_each_cell(F&& f) const {
    if (dims == 1) {
      for (std::size_t i = 0; i < n[0]; ++i) f(i, center(0, i), 0.0);
    } else {
      for (std::size_t i = 0; i < n[0]; ++i)
        for (std::size_t j = 0; j < n[1]; ++j) f(i * n[1] + j, center(0, i), center(1, j));
    }
  }
};

inline void validate(const GridDensity& g, double mass_tol = 1e-10) {
  detail::require(g.dims == 1 || g.dims == 2, "grid density must be 1D or 2D");
  detail::require(g.values.size() == (g.dims == 1 ? g.n[0] : g.n[0] * g.n[1]), "grid value count mismatch");
  for (double v : g.values) detail::require(v >= 0.0 && std::isfinite(v), "grid density has a negative or non-finite mass");
  detail::require(std::abs(g.total() - 1.0) <= mass_tol, "grid density is not normalized");
}

inline void require_same_grid(const GridDensity& a, const GridDensity& b) {
  if (!a.same_grid(b)) throw grid_error("grid densities live on different grids");
}

/// Normalized density from a log-density evaluated at cell centers.
inline GridDensity density_from_log(GridDensity grid, const std::function<double(double, double)>& logp) {
  std::vector<double> lv(grid.size());
  double mx = -std::numeric_limits<double>::infinity();
  grid.for_each_cell([&](std::size_t k, double x, double y) {
    lv[k] = logp(x, y);
    mx = std::max(mx, lv[k]);
  });
  if (!std::isfinite(mx)) throw grid_error("log-density is nowhere finite on the grid");
  for (std::size_t k = 0; k < lv.size(); ++k) grid.values[k] = std::exp(lv[k] - mx);
  grid.normalize();
  return grid;
}

/// A Gaussian law sampled at cell centers (1D or 2D).
inline GridDensity gaussian_grid(const GaussianLaw& g, GridDensity grid) {
  validate(g);
  detail::require(g.dim() == grid.dims, "Gaussian dimension must match the grid");
  const Eigen::MatrixXd P = g.cov.inverse();
  return density_from_log(std::move(grid), [&](double x, double y) {
    Eigen::VectorXd v(g.dim());
    v(0) = x - g.mean(0);
    if (g.dim() == 2) v(1) = y - g.mean(1);
    return -0.5 * v.dot(P * v);
  });
}

/// CSV rows: cell index, coordinate(s), mass.
inline void write_csv(std::ostream& os, const GridDensity& g) {
  os.precision(17);
  if (g.dims == 1) {
    os << "cell,x,mass\n";
    g.for_each_cell([&](std::size_t k, double x, double) { os << k << ',' << x << ',' << g.values[k] << '\n'; });
  } else {
    os << "cell,x,y,mass\n";
    g.for_each_cell([&](std::size_t k, double x, double y) { os << k << ',' << x << ',' << y << ',' << g.values[k] << '\n'; });
  }
}

}  // namespace langevin_lab
