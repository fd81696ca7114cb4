#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <fftw3.h>

#include "decay_curve.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "grid_density.hpp"
#include "potentials.hpp"

namespace langevin_lab {

/// quadrature: direct LMC kernel, needs >= 4 cells per kernel standard deviation.
/// spectral (1D): exact pushforward of the cell CDF through x - hV'(x), then the
/// Gaussian step as the heat multiplier exp(-h k^2) in Fourier space.
enum class Backend { automatic, quadrature, spectral };

inline const char* to_string(Backend b) {
  switch (b) {
    case Backend::automatic: return "automatic";
    case Backend::quadrature: return "quadrature";
    case Backend::spectral: return "spectral";
  }
  return "?";
}

inline Backend backend_from_string(const std::string& s) {
  for (Backend b : {Backend::automatic, Backend::quadrature, Backend::spectral})
    if (s == to_string(b)) return b;
  throw precondition_error("unknown propagation backend '" + s + "'");
}

struct PropagationConfig {
  double h = 1e-3;
  std::size_t n_steps = 1;
  double kernel_truncation = 8.0;
  PotentialSpec potential;
  Backend backend = Backend::automatic;
  std::size_t record_stride = 1;
  double boundary_tol = 1e-8;
  double mass_tol = 1e-6;
  double min_cells_per_sigma = 4.0;
  /// Spectral backend: cells below this fraction of the peak are FFT round-off and are zeroed.
  double noise_floor = 1e-13;
};

struct PropagationStats {
  Backend backend = Backend::automatic;
  double cells_per_sigma = 0.0;
  double max_renorm_drift = 0.0;   // max over steps of |pre-renormalization mass - 1|
  double max_boundary_mass = 0.0;
  double clipped_mass = 0.0;       // total mass removed by clipping (spectral backend)
  std::size_t steps = 0;
};

struct Propagation {
  std::vector<double> times;
  std::vector<GridDensity> snapshots;
  PropagationStats stats;
};

/// Normalized grid density of exp(-V); the boundary cells must hold < tol mass.
inline GridDensity target_density_grid(const PotentialSpec& spec, GridDensity layout, double boundary_tol = 1e-8) {
  detail::require(spec.d == layout.dims, "target dimension must match the grid");
  detail::require(spec.d <= 2, "grid targets are limited to d <= 2");
  auto out = density_from_log(std::move(layout), [&](double x, double y) {
    const double pt[2] = {x, y};
    return -spec.V(std::span<const double>(pt, static_cast<std::size_t>(spec.d)));
  });
  if (out.boundary_mass() >= boundary_tol)
    throw grid_error("grid window too small: boundary cells hold " + std::to_string(out.boundary_mass()) + " of the target mass");
  return out;
}

inline GridDensity target_density_grid(const PotentialSpec& spec, double lo, double hi, std::size_t n) {
  return target_density_grid(spec, GridDensity::zeros_1d(lo, hi, n));
}

namespace detail {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    if (p) fftw_destroy_plan(p);
  }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace detail

/// One-step LMC law on a fixed grid; owns precomputed kernels and FFT plans.
class LmcPropagator {
 public:
  LmcPropagator(const GridDensity& layout, const PropagationConfig& cfg) : layout_(layout), cfg_(cfg) {
    require(cfg.h > 0.0, "step size must be positive");
    require(cfg.kernel_truncation >= 6.0, "kernel truncation must be at least 6 standard deviations");
    require(cfg.potential.d == layout.dims, "potential dimension must match the grid");
    require(static_cast<bool>(cfg.potential.gradV), "potential needs a gradient");
    sigma_ = std::sqrt(2.0 * cfg.h);
    double dxmax = layout.dx(0);
    if (layout.dims == 2) dxmax = std::max(dxmax, layout.dx(1));
    stats_.cells_per_sigma = sigma_ / dxmax;
    Backend b = cfg.backend;
    if (b == Backend::automatic)
      b = (stats_.cells_per_sigma >= cfg.min_cells_per_sigma || layout.dims == 2) ? Backend::quadrature : Backend::spectral;
    if (b == Backend::quadrature && stats_.cells_per_sigma < cfg.min_cells_per_sigma)
      throw grid_error("kernel under-resolved: " + std::to_string(stats_.cells_per_sigma) + " cells per standard deviation (need " +
                       std::to_string(cfg.min_cells_per_sigma) + ")");
    if (b == Backend::spectral && layout.dims != 1) throw grid_error("the spectral backend is one-dimensional");
    stats_.backend = b;
    if (b == Backend::quadrature) {
      layout.dims == 1 ? build_quadrature_1d() : build_quadrature_2d();
    } else {
      build_spectral();
    }
  }

  const PropagationStats& stats() const { return stats_; }
  double sigma() const { return sigma_; }

  /// Zero the cells the backend cannot resolve (spectral: below the noise floor) and renormalize.
  void condition(GridDensity& mu) {
    if (stats_.backend != Backend::spectral) return;
    const double floor = cfg_.noise_floor * *std::max_element(mu.values.begin(), mu.values.end());
    double kept = 0.0;
    for (auto& v : mu.values) {
      if (v < floor) {
        stats_.clipped_mass += v;
        v = 0.0;
      }
      kept += v;
    }
    for (auto& v : mu.values) v /= kept;
  }

  /// Advance `mu` by one LMC step in place.
  void step(GridDensity& mu) {
    if (!mu.same_grid(layout_)) throw grid_error("density grid differs from the propagator grid");
    double pre_mass = 0.0;
    if (stats_.backend == Backend::quadrature) pre_mass = layout_.dims == 1 ? step_quadrature_1d(mu) : step_quadrature_2d(mu);
    else pre_mass = step_spectral(mu);
    const double drift = std::abs(pre_mass - 1.0);
    stats_.max_renorm_drift = std::max(stats_.max_renorm_drift, drift);
    if (drift > cfg_.mass_tol)
      throw grid_error("boundary leakage: step " + std::to_string(stats_.steps + 1) + " kept mass " + std::to_string(pre_mass));
    for (auto& v : mu.values) v /= pre_mass;
    const double bm = mu.boundary_mass();
    stats_.max_boundary_mass = std::max(stats_.max_boundary_mass, bm);
    if (bm >= cfg_.boundary_tol)
      throw grid_error("boundary leakage: boundary cells hold " + std::to_string(bm) + " after step " + std::to_string(stats_.steps + 1));
    ++stats_.steps;
  }

 private:
  static void require(bool c, const std::string& m) { detail::require(c, m); }

  double drift_1d(double x) const { return x - cfg_.h * cfg_.potential.grad1(x); }

  // ---- quadrature -----------------------------------------------------------
  void build_quadrature_1d() {
    const std::size_t n = layout_.n[0];
    const double dx = layout_.dx(0);
    const double reach = cfg_.kernel_truncation * sigma_;
    offsets_.assign(n + 1, 0);
    first_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = drift_1d(layout_.center(0, i));
      if (!std::isfinite(c)) throw grid_error("drift map is not finite on the grid");
      const double jl = std::ceil((c - reach - layout_.lo[0]) / dx - 0.5);
      const double jh = std::floor((c + reach - layout_.lo[0]) / dx - 0.5);
      const long lo = static_cast<long>(std::max(0.0, jl));
      const long hi = static_cast<long>(std::min(static_cast<double>(n) - 1.0, jh));
      first_[i] = static_cast<std::size_t>(std::max(0L, lo));
      if (hi >= lo) {
        for (long j = lo; j <= hi; ++j) weights_.push_back(detail::normal_pdf((layout_.center(0, j) - c) / sigma_) * dx / sigma_);
      }
      offsets_[i + 1] = weights_.size();
    }
  }

  double step_quadrature_1d(GridDensity& mu) {
    const std::size_t n = layout_.n[0];
    scratch_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = mu.values[i];
      if (m == 0.0) continue;
      const std::size_t b = offsets_[i], e = offsets_[i + 1];
      double* out = scratch_.data() + first_[i];
      for (std::size_t k = b; k < e; ++k) out[k - b] += m * weights_[k];
    }
    mu.values.swap(scratch_);
    return mu.total();
  }

  void build_quadrature_2d() {
    const std::size_t nx = layout_.n[0], ny = layout_.n[1];
    targets_.resize(nx * ny * 2);
    double pt[2], g[2];
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        pt[0] = layout_.center(0, i);
        pt[1] = layout_.center(1, j);
        cfg_.potential.gradV(std::span<const double>(pt, 2), std::span<double>(g, 2));
        targets_[2 * (i * ny + j)] = pt[0] - cfg_.h * g[0];
        targets_[2 * (i * ny + j) + 1] = pt[1] - cfg_.h * g[1];
      }
  }

  double step_quadrature_2d(GridDensity& mu) {
    const std::size_t nx = layout_.n[0], ny = layout_.n[1];
    const double dx = layout_.dx(0), dy = layout_.dx(1);
    const double reach = cfg_.kernel_truncation * sigma_;
    scratch_.assign(nx * ny, 0.0);
    std::vector<double> wx, wy;
    for (std::size_t s = 0; s < nx * ny; ++s) {
      const double m = mu.values[s];
      if (m == 0.0) continue;
      const double cx = targets_[2 * s], cy = targets_[2 * s + 1];
      const long ilo = std::max(0L, static_cast<long>(std::ceil((cx - reach - layout_.lo[0]) / dx - 0.5)));
      const long ihi = std::min(static_cast<long>(nx) - 1, static_cast<long>(std::floor((cx + reach - layout_.lo[0]) / dx - 0.5)));
      const long jlo = std::max(0L, static_cast<long>(std::ceil((cy - reach - layout_.lo[1]) / dy - 0.5)));
      const long jhi = std::min(static_cast<long>(ny) - 1, static_cast<long>(std::floor((cy + reach - layout_.lo[1]) / dy - 0.5)));
      if (ihi < ilo || jhi < jlo) continue;
      wx.resize(static_cast<std::size_t>(ihi - ilo + 1));
      wy.resize(static_cast<std::size_t>(jhi - jlo + 1));
      for (long i = ilo; i <= ihi; ++i) wx[i - ilo] = detail::normal_pdf((layout_.center(0, i) - cx) / sigma_) * dx / sigma_;
      for (long j = jlo; j <= jhi; ++j) wy[j - jlo] = m * detail::normal_pdf((layout_.center(1, j) - cy) / sigma_) * dy / sigma_;
      for (long i = ilo; i <= ihi; ++i) {
        double* row = scratch_.data() + static_cast<std::size_t>(i) * ny + jlo;
        const double a = wx[i - ilo];
        for (std::size_t j = 0; j < wy.size(); ++j) row[j] += a * wy[j];
      }
    }
    mu.values.swap(scratch_);
    return mu.total();
  }

  // ---- spectral ---------------------------------------------------------------
  void build_spectral() {
    const std::size_t n = layout_.n[0];
    const double dx = layout_.dx(0), lo = layout_.lo[0], hi = layout_.hi[0];
    // Preimages of the cell edges under T(x) = x - hV'(x), by x <- e + hV'(x).
    pre_idx_.resize(n + 1);
    pre_t_.resize(n + 1);
    double prev = -kInf;
    for (std::size_t k = 0; k <= n; ++k) {
      const double e = lo + static_cast<double>(k) * dx;
      double x = e;
      bool ok = false;
      for (int it = 0; it < 500; ++it) {
        const double nx = e + cfg_.h * cfg_.potential.grad1(x);
        if (std::abs(nx - x) <= 1e-15 * (1.0 + std::abs(x))) {
          x = nx;
          ok = true;
          break;
        }
        x = nx;
      }
      if (!ok || !std::isfinite(x)) throw grid_error("drift map preimage did not converge (h too large for the spectral backend)");
      if (!(x > prev)) throw grid_error("drift map is not monotone on the grid");
      prev = x;
      // Locate x among the edges.
      const double u = (x - lo) / dx;
      if (x <= lo) {
        pre_idx_[k] = -1;
        pre_t_[k] = 0.0;
      } else if (x >= hi) {
        pre_idx_[k] = static_cast<long>(n);
        pre_t_[k] = 0.0;
      } else {
        const long j = std::min(static_cast<long>(n) - 1, static_cast<long>(std::floor(u)));
        pre_idx_[k] = j;
        pre_t_[k] = u - static_cast<double>(j);
      }
    }
    // Heat multiplier on a zero-padded periodic grid of length 2n.
    m_ = 2 * n;
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * m_)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (m_ / 2 + 1))));
    fwd_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_.get(), spec_.get(), FFTW_ESTIMATE));
    bwd_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_.get(), real_.get(), FFTW_ESTIMATE));
    if (!fwd_ || !bwd_) throw grid_error("FFT plan creation failed");
    mult_.resize(m_ / 2 + 1);
    const double period = static_cast<double>(m_) * dx;
    for (std::size_t k = 0; k <= m_ / 2; ++k) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / period;
      mult_[k] = std::exp(-cfg_.h * w * w) / static_cast<double>(m_);
    }
    F_.resize(n + 1);
    S_.resize(n + 1);
    D_.resize(n + 1);
  }

  double step_spectral(GridDensity& mu) {
    const std::size_t n = layout_.n[0];
    const auto& m = mu.values;
    // Left and right cumulative masses at the edges, each accurate in its own tail.
    F_[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) F_[k + 1] = F_[k] + m[k];
    S_[n] = 0.0;
    for (std::size_t k = n; k-- > 0;) S_[k] = S_[k + 1] + m[k];
    const double total = F_[n];
    // Monotone (Fritsch–Butland) edge slopes of F in units of mass per cell.
    D_[0] = m[0];
    D_[n] = m[n - 1];
    for (std::size_t k = 1; k < n; ++k) {
      const double a = m[k - 1], b = m[k];
      D_[k] = (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
    }
    std::size_t c = 0;
    while (c < n && F_[c] < 0.5 * total) ++c;
    auto hermite = [&](const std::vector<double>& Y, double sign, long j, double t) {
      const double t2 = t * t, t3 = t2 * t;
      const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
      return h00 * Y[j] + h10 * sign * D_[j] + h01 * Y[j + 1] + h11 * sign * D_[j + 1];
    };
    auto F_at = [&](std::size_t k) {
      const long j = pre_idx_[k];
      if (j < 0) return 0.0;
      if (j >= static_cast<long>(n)) return total;
      return hermite(F_, 1.0, j, pre_t_[k]);
    };
    auto S_at = [&](std::size_t k) {
      const long j = pre_idx_[k];
      if (j < 0) return total;
      if (j >= static_cast<long>(n)) return 0.0;
      return hermite(S_, -1.0, j, pre_t_[k]);
    };
    // Edge c as a position: preimage index relative to c decides the representation.
    auto left_of_c = [&](std::size_t k) { return pre_idx_[k] < static_cast<long>(c); };
    double* r = real_.get();
    std::fill(r, r + m_, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double mass;
      if (left_of_c(j + 1)) mass = F_at(j + 1) - F_at(j);
      else if (!left_of_c(j)) mass = S_at(j) - S_at(j + 1);
      else mass = (F_[c] - F_at(j)) + (S_[c] - S_at(j + 1));
      r[j] = std::max(0.0, mass);
    }
    fftw_execute(fwd_.get());
    auto* s = spec_.get();
    for (std::size_t k = 0; k <= m_ / 2; ++k) {
      s[k][0] *= mult_[k];
      s[k][1] *= mult_[k];
    }
    fftw_execute(bwd_.get());
    double kept = 0.0;
    const double floor = cfg_.noise_floor * *std::max_element(r, r + n);
    for (std::size_t j = 0; j < n; ++j) {
      double v = r[j];
      if (v < floor) {
        stats_.clipped_mass += std::abs(v);
        v = 0.0;
      }
      mu.values[j] = v;
      kept += v;
    }
    return kept;
  }

  GridDensity layout_;
  PropagationConfig cfg_;
  double sigma_ = 0.0;
  PropagationStats stats_;
  std::vector<double> scratch_;
  // quadrature 1D
  std::vector<std::size_t> offsets_, first_;
  std::vector<double> weights_;
  // quadrature 2D
  std::vector<double> targets_;
  // spectral
  std::vector<long> pre_idx_;
  std::vector<double> pre_t_, mult_, F_, S_, D_;
  std::size_t m_ = 0;
  std::unique_ptr<double, detail::FftwFree> real_;
  std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
  detail::FftwPlan fwd_, bwd_;
};

/// Runs n_steps LMC steps, calling obs(step, t, mu) at step 0, every
/// record_stride steps and at the last step.
template <class Observer>
PropagationStats propagate_observed(GridDensity mu, const PropagationConfig& cfg, Observer&& obs) {
  validate(mu, 1e-8);
  detail::require(cfg.record_stride >= 1, "record stride must be at least 1");
  LmcPropagator prop(mu, cfg);
  prop.condition(mu);
  obs(std::size_t{0}, 0.0, static_cast<const GridDensity&>(mu));
  for (std::size_t k = 1; k <= cfg.n_steps; ++k) {
    prop.step(mu);
    if (k % cfg.record_stride == 0 || k == cfg.n_steps) obs(k, static_cast<double>(k) * cfg.h, static_cast<const GridDensity&>(mu));
  }
  return prop.stats();
}

/// Exact law of the LMC chain on the grid, snapshots every record_stride steps.
inline Propagation propagate_lmc_density(const GridDensity& mu0, const PropagationConfig& cfg) {
  Propagation out;
  out.stats = propagate_observed(mu0, cfg, [&](std::size_t, double t, const GridDensity& mu) {
    out.times.push_back(t);
    out.snapshots.push_back(mu);
  });
  return out;
}

/// R_q(snapshot_t ‖ target) for each snapshot.
inline DecayCurve decay_curve(double q, const Propagation& seq, const GridDensity& target) {
  DecayCurve c;
  c.q = q;
  for (std::size_t i = 0; i < seq.snapshots.size(); ++i) {
    c.times.push_back(seq.times[i]);
    c.values.push_back(renyi_grid(q, seq.snapshots[i], target).value);
  }
  return c;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

/// lo:hi:n per axis, axes separated by 'x'.
inline std::string grid_tag(const GridDensity& g) {
  std::string s;
  for (int a = 0; a < g.dims; ++a) {
    if (a) s += 'x';
    s += fmt_num(g.lo[a]) + ':' + fmt_num(g.hi[a]) + ':' + std::to_string(g.n[a]);
  }
  return s;
}

}  // namespace detail

/// Decay curve measured on the fly without storing snapshots.
inline DecayCurve lmc_decay_curve(double q, const GridDensity& mu0, const PropagationConfig& cfg, const GridDensity& target,
                                  PropagationStats* stats = nullptr) {
  DecayCurve c;
  c.q = q;
  const auto st = propagate_observed(mu0, cfg, [&](std::size_t, double t, const GridDensity& mu) {
    c.times.push_back(t);
    c.values.push_back(renyi_grid(q, mu, target).value);
  });
  c.meta["h"] = detail::fmt_num(cfg.h);
  c.meta["potential"] = cfg.potential.id;
  c.meta["grid"] = detail::grid_tag(mu0);
  c.meta["backend"] = to_string(st.backend);
  if (stats) *stats = st;
  return c;
}

struct DiffusionOptions {
  double h_fine = 1e-4;
  bool check_refinement = false;  // rerun at h_fine/2 and compare R_2(π_T ‖ π)
  double refinement_tol = 0.05;
};

struct RefinementCheck {
  double r_fine = 0.0;
  double r_half = 0.0;
  double rel_change = 0.0;
  bool passes = false;
};

struct DiffusionResult {
  DecayCurve curve;
  PropagationStats stats;
  std::optional<RefinementCheck> refinement;
};

/// Fine-step LMC proxy for the Langevin diffusion over the horizon
/// T = cfg.n_steps * cfg.h, recording R_q(π_t ‖ target) every cfg.record_stride
/// coarse steps. h_fine must be at most h/50.
inline DiffusionResult propagate_diffusion_density(double q, const GridDensity& mu0, const PropagationConfig& cfg,
                                                   const GridDensity& target, const DiffusionOptions& opt) {
  detail::require(opt.h_fine > 0.0 && opt.h_fine <= cfg.h / 50.0 * (1.0 + 1e-12), "diffusion proxy needs h_fine <= h/50");
  auto run = [&](double hf) {
    PropagationConfig fine = cfg;
    const double ratio = std::round(cfg.h / hf);
    fine.h = cfg.h / ratio;
    fine.n_steps = cfg.n_steps * static_cast<std::size_t>(ratio);
    fine.record_stride = cfg.record_stride * static_cast<std::size_t>(ratio);
    PropagationStats st;
    auto curve = lmc_decay_curve(q, mu0, fine, target, &st);
    curve.meta["h_fine"] = detail::fmt_num(fine.h);
    return std::make_pair(curve, st);
  };
  DiffusionResult out;
  auto [curve, st] = run(opt.h_fine);
  out.curve = std::move(curve);
  out.stats = st;
  if (opt.check_refinement) {
    auto terminal_r2 = [&](double hf) {
      PropagationConfig fine = cfg;
      const double ratio = std::round(cfg.h / hf);
      fine.h = cfg.h / ratio;
      fine.n_steps = cfg.n_steps * static_cast<std::size_t>(ratio);
      fine.record_stride = fine.n_steps;
      GridDensity last;
      propagate_observed(mu0, fine, [&](std::size_t k, double, const GridDensity& mu) {
        if (k == fine.n_steps) last = mu;
      });
      return renyi_grid(2.0, last, target).value;
    };
    RefinementCheck rc;
    rc.r_fine = q == 2.0 ? out.curve.values.back() : terminal_r2(opt.h_fine);
    rc.r_half = terminal_r2(opt.h_fine / 2.0);
    rc.rel_change = std::abs(rc.r_half - rc.r_fine) / std::max(rc.r_fine, 1e-300);
    rc.passes = rc.rel_change <= opt.refinement_tol;
    out.refinement = rc;
    if (!rc.passes)
      throw convergence_error("refinement check failure: halving h_fine changed R_2(pi_T||pi) by " +
                              std::to_string(100.0 * rc.rel_change) + "%");
  }
  return out;
}

}  // namespace langevin_lab
