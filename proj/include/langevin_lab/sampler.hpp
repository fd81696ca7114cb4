#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gaussian_law.hpp"
#include "grid_density.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "rng.hpp"

namespace langevin_lab {

/// n particles in R^d stored row-major: particles[i * d + j].
struct Ensemble {
  std::size_t n = 0;
  int d = 1;
  std::vector<double> particles;
  std::uint64_t step_index = 0;
  std::uint64_t seed = 0;
  double h = 0.0;

  std::span<const double> particle(std::size_t i) const { return {particles.data() + i * d, static_cast<std::size_t>(d)}; }
  std::span<double> particle(std::size_t i) { return {particles.data() + i * d, static_cast<std::size_t>(d)}; }

  Eigen::VectorXd mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m(j) += particles[i * d + j];
    return m / static_cast<double>(n);
  }

  /// Unbiased sample covariance.
  Eigen::MatrixXd covariance() const {
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(j) = particles[i * d + j] - m(j);
      c.noalias() += x * x.transpose();
    }
    return c / static_cast<double>(n - 1);
  }
};

struct NormStat {
  std::uint64_t k = 0;
  double max_norm = 0.0;
  double mean_norm = 0.0;
};

struct LmcOptions {
  bool record_norms = false;
  std::size_t norm_stride = 1;
  unsigned threads = 0;
};

struct LmcResult {
  Ensemble ensemble;
  std::vector<NormStat> norms;
};

/// Draws n particles from a Gaussian law (stream init).
inline Ensemble sample_gaussian(const GaussianLaw& law, std::size_t n, std::uint64_t seed, unsigned threads = 0) {
  validate(law);
  detail::require(n >= 1, "ensemble needs at least one particle");
  Ensemble e;
  e.n = n;
  e.d = law.dim();
  e.seed = seed;
  e.particles.resize(n * e.d);
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(law.cov).matrixL();
  parallel_for(n, [&](std::size_t b, std::size_t end) {
    Eigen::VectorXd z(e.d);
    for (std::size_t i = b; i < end; ++i) {
      rng::NormalBlock nb(seed, rng::Stream::init, i, 0);
      nb.fill(std::span<double>(z.data(), e.d));
      const Eigen::VectorXd x = law.mean + L * z;
      for (int j = 0; j < e.d; ++j) e.particles[i * e.d + j] = x(j);
    }
  }, threads);
  return e;
}

/// Inverse-CDF samples from a 1D grid density, uniform within the chosen cell.
inline Ensemble sample_from_grid(const GridDensity& g, std::size_t n, std::uint64_t seed) {
  detail::require(g.dims == 1, "grid sampling is one-dimensional");
  std::vector<double> cdf(g.size());
  std::partial_sum(g.values.begin(), g.values.end(), cdf.begin());
  const double total = cdf.back();
  Ensemble e;
  e.n = n;
  e.d = 1;
  e.seed = seed;
  e.particles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::NormalBlock nb(seed, rng::Stream::init, i, 0);
    const double u = nb.uniform(0) * total;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const auto k = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(g.size()) - 1));
    e.particles[i] = g.lo[0] + (static_cast<double>(k) + nb.uniform(1)) * g.dx(0);
  }
  return e;
}

namespace detail {

/// g holds 2 * d doubles: the gradient, then the noise.
inline void lmc_particle_step(const PotentialSpec& spec, std::span<double> x, std::span<double> g, std::uint64_t seed,
                              std::uint64_t particle, std::uint64_t step, double h) {
  const std::size_t d = x.size();
  spec.gradV(x, g.first(d));
  rng::NormalBlock(seed, rng::Stream::lmc_noise, particle, step).fill(g.subspan(d, d));
  const double s = std::sqrt(2.0 * h);
  for (std::size_t j = 0; j < d; ++j) x[j] += -h * g[j] + s * g[d + j];
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Advances every particle by N LMC steps. The noise of particle i at step k is
/// NormalBlock(seed, lmc_noise, i, k), so results do not depend on threading.
inline void lmc_advance(const PotentialSpec& spec, Ensemble& e, std::uint64_t N, const LmcOptions& opt = {},
                        std::vector<NormStat>* norms = nullptr) {
  detail::require(e.h > 0.0, "step size must be positive");
  detail::require(spec.d == e.d, "potential dimension must match the ensemble");
  const std::uint64_t k0 = e.step_index;
  const std::size_t d = static_cast<std::size_t>(e.d);
  const bool record = opt.record_norms && norms;
  const std::size_t stride = std::max<std::size_t>(1, opt.norm_stride);

  auto record_now = [&](std::uint64_t k) {
    NormStat st;
    st.k = k;
    double sum = 0.0;
    for (std::size_t i = 0; i < e.n; ++i) {
      const double r = norm2(e.particle(i));
      st.max_norm = std::max(st.max_norm, r);
      sum += r;
    }
    st.mean_norm = sum / static_cast<double>(e.n);
    norms->push_back(st);
  };

  auto diverged = [&](std::uint64_t step, std::size_t particle) {
    return chain_diverged("LMC chain diverged: non-finite coordinate at step " + std::to_string(step) + " (particle " +
                              std::to_string(particle) + ")",
                          static_cast<std::size_t>(step));
  };

  if (!record) {
    // Particle-major: each particle runs all N steps; report the earliest failing step.
    std::vector<std::uint64_t> first_bad(e.n, std::numeric_limits<std::uint64_t>::max());
    parallel_for(e.n, [&](std::size_t b, std::size_t end) {
      std::vector<double> g(2 * d);
      for (std::size_t i = b; i < end; ++i) {
        auto x = e.particle(i);
        for (std::uint64_t k = k0; k < k0 + N; ++k) {
          detail::lmc_particle_step(spec, x, g, e.seed, i, k, e.h);
          if (!detail::all_finite(x)) {
            first_bad[i] = k + 1;
            break;
          }
        }
      }
    }, opt.threads);
    const auto it = std::min_element(first_bad.begin(), first_bad.end());
    if (it != first_bad.end() && *it != std::numeric_limits<std::uint64_t>::max())
      throw diverged(*it, static_cast<std::size_t>(it - first_bad.begin()));
    e.step_index = k0 + N;
    return;
  }

  record_now(k0);
  for (std::uint64_t k = k0; k < k0 + N; ++k) {
    std::vector<char> bad(e.n, 0);
    parallel_for(e.n, [&](std::size_t b, std::size_t end) {
      std::vector<double> g(2 * d);
      for (std::size_t i = b; i < end; ++i) {
        auto x = e.particle(i);
        detail::lmc_particle_step(spec, x, g, e.seed, i, k, e.h);
        bad[i] = !detail::all_finite(x);
      }
    }, opt.threads);
    const auto it = std::find(bad.begin(), bad.end(), 1);
    if (it != bad.end()) throw diverged(k + 1, static_cast<std::size_t>(it - bad.begin()));
    e.step_index = k + 1;
    if ((k + 1 - k0) % stride == 0 || k + 1 == k0 + N) record_now(k + 1);
  }
}

/// N LMC steps from init with n_particles particles.
inline LmcResult lmc_run(const PotentialSpec& spec, const GaussianLaw& init, double h, std::uint64_t N, std::size_t n_particles,
                         std::uint64_t seed, const LmcOptions& opt = {}) {
  detail::require(h > 0.0, "step size must be positive");
  LmcResult out;
  out.ensemble = sample_gaussian(init, n_particles, seed, opt.threads);
  out.ensemble.h = h;
  lmc_advance(spec, out.ensemble, N, opt, &out.norms);
  return out;
}

enum class BridgeNoise { matched, fresh };

/// Positions of the interpolated process at time kh + t_offset:
/// x_kh − t ∇V(x_kh) + √(2t) ξ. With matched noise, ξ is the draw the next LMC
/// step uses, so t_offset = h reproduces that step exactly.
inline std::vector<double> interpolated_position(const PotentialSpec& spec, const Ensemble& e, double t_offset,
                                                 BridgeNoise noise = BridgeNoise::fresh, std::uint64_t fresh_seed = 0) {
  if (!(t_offset >= 0.0 && t_offset <= e.h))
    throw precondition_error("interpolation offset must lie in [0, h], got " + std::to_string(t_offset));
  detail::require(spec.d == e.d, "potential dimension must match the ensemble");
  std::vector<double> out(e.particles);
  if (t_offset == 0.0) return out;
  const std::size_t d = static_cast<std::size_t>(e.d);
  const double s = std::sqrt(2.0 * t_offset);
  parallel_for(e.n, [&](std::size_t b, std::size_t end) {
    std::vector<double> g(d), z(d);
    for (std::size_t i = b; i < end; ++i) {
      std::span<double> x(out.data() + i * d, d);
      spec.gradV(x, g);
      const rng::NormalBlock nb = noise == BridgeNoise::matched
                                      ? rng::NormalBlock(e.seed, rng::Stream::lmc_noise, i, e.step_index)
                                      : rng::NormalBlock(fresh_seed, rng::Stream::interpolation, i, e.step_index);
      nb.fill(z);
      for (std::size_t j = 0; j < d; ++j) x[j] += -t_offset * g[j] + s * z[j];
    }
  });
  return out;
}

// ---- iterate tails ------------------------------------------------------------

/// Inputs of the high-probability bound on max_k ‖z_kh‖ over a horizon T = N h.
struct TailBoundInputs {
  double m = 1.0;          // mean norm, clamped at >= 1
  double T = 1.0;
  double R2_hat = 1.0;     // R_2(μ0 ‖ π̂), clamped at >= 1
  std::uint64_t N = 1;
  double h = 0.1;
  double L = 1.0;
  int d = 1;
  double delta = 0.1;
  double c_main = 490.0;
};

/// R_δ = 2m + c √(T R̂ ln 8N) + 230 √h m (L + 1/T) √T / √d + 160 √(T ln(1/δ)).
inline double tail_threshold(const TailBoundInputs& in) {
  detail::require(in.delta > 0.0 && in.delta < 0.5, "delta must lie in (0, 1/2)");
  detail::require(in.T > 0.0 && in.h > 0.0 && in.N >= 1 && in.d >= 1, "tail bound inputs out of range");
  const double m = std::max(1.0, in.m);
  const double r2 = std::max(1.0, in.R2_hat);
  return 2.0 * m + in.c_main * std::sqrt(in.T * r2 * std::log(8.0 * static_cast<double>(in.N))) +
         230.0 * std::sqrt(in.h) * m * (in.L + 1.0 / in.T) * std::sqrt(in.T) / std::sqrt(static_cast<double>(in.d)) +
         160.0 * std::sqrt(in.T * std::log(1.0 / in.delta));
}

struct TailReport {
  double delta = 0.1;
  double threshold = 0.0;
  double empirical_exceed_rate = 0.0;
  std::size_t n_runs = 0;
  double allowed = 0.0;  // delta + 3 sqrt(delta (1 - delta) / n_runs)
  bool passes = false;
};

/// norms[r][k] = ‖z_kh‖ along run r; a run exceeds when max_k norms[r][k] > threshold.
inline TailReport check_iterate_tails(const std::vector<std::vector<double>>& norms, double delta, double threshold) {
  detail::require(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
  detail::require(!norms.empty(), "need at least one trajectory");
  TailReport r;
  r.delta = delta;
  r.threshold = threshold;
  r.n_runs = norms.size();
  std::size_t exceed = 0;
  for (const auto& run : norms) {
    const double mx = run.empty() ? 0.0 : *std::max_element(run.begin(), run.end());
    if (mx > threshold) ++exceed;
  }
  r.empirical_exceed_rate = static_cast<double>(exceed) / static_cast<double>(r.n_runs);
  r.allowed = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(r.n_runs));
  r.passes = r.empirical_exceed_rate <= r.allowed;
  return r;
}

inline TailReport check_iterate_tails(const std::vector<std::vector<double>>& norms, const TailBoundInputs& in) {
  return check_iterate_tails(norms, in.delta, tail_threshold(in));
}

/// Fine-step proxy for the diffusion: each coarse step of length h is split
/// into `fine` Euler steps (stream diffusion). Returns ‖z_kh‖ for k = 0..N-1 per run.
inline std::vector<std::vector<double>> diffusion_norm_paths(const PotentialSpec& spec, const GaussianLaw& init, double h,
                                                             std::uint64_t N, std::size_t fine, std::size_t n_runs,
                                                             std::uint64_t seed, unsigned threads = 0) {
  detail::require(h > 0.0 && N >= 1 && fine >= 1, "diffusion proxy needs h > 0, N >= 1 and fine >= 1");
  detail::require(init.dim() == spec.d, "init dimension must match the potential");
  const Ensemble start = sample_gaussian(init, n_runs, seed, threads);
  const std::size_t d = static_cast<std::size_t>(spec.d);
  const double hf = h / static_cast<double>(fine);
  const double s = std::sqrt(2.0 * hf);
  std::vector<std::vector<double>> out(n_runs, std::vector<double>(N));
  std::vector<std::uint64_t> first_bad(n_runs, std::numeric_limits<std::uint64_t>::max());
  parallel_for(n_runs, [&](std::size_t b, std::size_t end) {
    std::vector<double> x(d), g(d), z(d);
    for (std::size_t r = b; r < end; ++r) {
      std::copy_n(start.particles.begin() + r * d, d, x.begin());
      for (std::uint64_t k = 0; k < N; ++k) {
        out[r][k] = norm2(x);
        for (std::size_t f = 0; f < fine; ++f) {
          spec.gradV(x, g);
          rng::NormalBlock(seed, rng::Stream::diffusion, r, k * fine + f).fill(z);
          for (std::size_t j = 0; j < d; ++j) x[j] += -hf * g[j] + s * z[j];
        }
        if (!detail::all_finite(x)) {
          first_bad[r] = k + 1;
          break;
        }
      }
    }
  }, threads);
  const auto it = std::min_element(first_bad.begin(), first_bad.end());
  if (*it != std::numeric_limits<std::uint64_t>::max())
    throw chain_diverged("diffusion proxy diverged at coarse step " + std::to_string(*it), static_cast<std::size_t>(*it));
  return out;
}

// ---- exponential-moment checks ---------------------------------------------------

struct MgfReport {
  std::string bound;
  double lambda = 0.0;
  double mean = 1.0;        // Monte-Carlo estimate of the left side
  double std_error = 0.0;
  double rhs = 1.0;         // the bound
  double allowed = 1.0;     // rhs (1 + 3 SE / mean)
  bool holds = true;
};

namespace detail {

inline MgfReport mgf_from_samples(std::string bound, double lambda, const std::vector<double>& exponent_arg, double rhs) {
  MgfReport r;
  r.bound = std::move(bound);
  r.lambda = lambda;
  r.rhs = rhs;
  const double n = static_cast<double>(exponent_arg.size());
  double sum = 0.0, sum2 = 0.0;
  for (double a : exponent_arg) {
    const double v = std::exp(lambda * a);
    sum += v;
    sum2 += v * v;
  }
  r.mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - r.mean * r.mean)) * n / std::max(1.0, n - 1.0);
  r.std_error = std::sqrt(var / n);
  r.allowed = rhs * (1.0 + 3.0 * r.std_error / r.mean);
  r.holds = std::isfinite(r.mean) && r.mean <= r.allowed;
  return r;
}

}  // namespace detail

/// sup over inner_steps uniform sub-steps of ‖B_t‖² on [0, h], per path (stream brownian).
inline std::vector<double> brownian_sup_sq(int d, double h, std::size_t n_paths, std::size_t inner_steps, std::uint64_t seed,
                                           unsigned threads = 0) {
  detail::require(d >= 1 && h > 0.0, "Brownian sup needs d >= 1 and h > 0");
  detail::require(inner_steps >= 64, "sup discretization needs at least 64 inner steps");
  std::vector<double> sups(n_paths);
  const double s = std::sqrt(h / static_cast<double>(inner_steps));
  parallel_for(n_paths, [&](std::size_t b, std::size_t end) {
    std::vector<double> B(d), z(inner_steps * d);
    for (std::size_t p = b; p < end; ++p) {
      std::fill(B.begin(), B.end(), 0.0);
      rng::NormalBlock(seed, rng::Stream::brownian, p, 0).fill(z);
      double best = 0.0;
      std::size_t c = 0;
      for (std::size_t k = 0; k < inner_steps; ++k) {
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) {
          B[j] += s * z[c++];
          r2 += B[j] * B[j];
        }
        best = std::max(best, r2);
      }
      sups[p] = best;
    }
  }, threads);
  return sups;
}

/// E exp(λ sup_[0,h] ‖B‖²) <= exp(c d h λ) for λ <= 1/(4h); c = 6 in the lemma.
/// The discretized sup is a lower bound on the true sup, so a pass is conservative
/// only with respect to the Monte-Carlo error.
inline MgfReport check_brownian_mgf_detailed(int d, double h, double lambda, std::size_t n_paths, std::size_t inner_steps,
                                             std::uint64_t seed, double constant = 6.0) {
  if (!(lambda >= 0.0 && lambda <= 1.0 / (4.0 * h)))
    throw precondition_error("lambda must lie in [0, 1/(4h)]");
  const auto sups = brownian_sup_sq(d, h, n_paths, inner_steps, seed);
  return detail::mgf_from_samples("E exp(lambda sup|B|^2) <= exp(" + std::to_string(constant) + " d h lambda)", lambda, sups,
                                  std::exp(constant * d * h * lambda));
}

inline bool check_brownian_mgf(int d, double h, double lambda, std::size_t n_paths, std::size_t inner_steps, std::uint64_t seed,
                               double constant = 6.0) {
  return check_brownian_mgf_detailed(d, h, lambda, n_paths, inner_steps, seed, constant).holds;
}

/// E exp(λ sup_[0,h] ‖B‖^{2s}) <= exp(c d^s h^s λ) for s in (0,1), λ < 1/(12dh)^s; c = 144.
inline MgfReport check_brownian_mgf_fractional(int d, double h, double s, double lambda, std::size_t n_paths,
                                               std::size_t inner_steps, std::uint64_t seed, double constant = 144.0) {
  detail::require(s > 0.0 && s < 1.0, "fractional exponent s must lie in (0, 1)");
  if (!(lambda >= 0.0 && lambda < 1.0 / std::pow(12.0 * d * h, s)))
    throw precondition_error("lambda must lie in [0, 1/(12 d h)^s)");
  auto sups = brownian_sup_sq(d, h, n_paths, inner_steps, seed);
  for (auto& v : sups) v = std::pow(v, s);
  return detail::mgf_from_samples("E exp(lambda sup|B|^(2s)) <= exp(" + std::to_string(constant) + " d^s h^s lambda)", lambda,
                                  sups, std::exp(constant * std::pow(d * h, s) * lambda));
}

/// E exp(λ sup_[0,h] ‖z_t − z0‖^{2s}) <= exp{8 h^{2s} L^{2s} (1 + ‖z0‖^{2s²}) λ + 1152 d^s h^s λ}
/// for the diffusion from z0, simulated with inner_steps Euler sub-steps (stream displacement).
/// Requires h <= 1/(6L) and λ <= 1/(96 d^s h^s); s must be the declared Hölder exponent.
inline MgfReport check_displacement_mgf_detailed(const PotentialSpec& spec, std::span<const double> z0, double h, double lambda,
                                                 double s, std::size_t n_paths, std::uint64_t seed,
                                                 std::size_t inner_steps = 64, double constant = 1152.0) {
  detail::require(static_cast<int>(z0.size()) == spec.d, "z0 dimension must match the potential");
  detail::require(s == spec.smoothness.s, "s must equal the declared Hölder exponent");
  detail::require(inner_steps >= 64, "sup discretization needs at least 64 inner steps");
  const double L = spec.smoothness.L;
  const int d = spec.d;
  if (!(h > 0.0 && h <= 1.0 / (6.0 * L))) throw precondition_error("displacement bound needs h <= 1/(6L)");
  if (!(lambda >= 0.0 && lambda <= 1.0 / (96.0 * std::pow(d, s) * std::pow(h, s))))
    throw precondition_error("displacement bound needs lambda <= 1/(96 d^s h^s)");
  const std::size_t du = static_cast<std::size_t>(d);
  const double hf = h / static_cast<double>(inner_steps);
  const double sd = std::sqrt(2.0 * hf);
  std::vector<double> sups(n_paths);
  parallel_for(n_paths, [&](std::size_t b, std::size_t end) {
    std::vector<double> x(du), g(du), z(inner_steps * du);
    for (std::size_t p = b; p < end; ++p) {
      std::copy(z0.begin(), z0.end(), x.begin());
      rng::NormalBlock(seed, rng::Stream::displacement, p, 0).fill(z);
      double best = 0.0;
      std::size_t c = 0;
      for (std::size_t k = 0; k < inner_steps; ++k) {
        spec.gradV(x, g);
        double r2 = 0.0;
        for (std::size_t j = 0; j < du; ++j) {
          x[j] += -hf * g[j] + sd * z[c++];
          r2 += (x[j] - z0[j]) * (x[j] - z0[j]);
        }
        best = std::max(best, r2);
      }
      sups[p] = std::pow(best, s);
    }
  });
  const double z0n = norm2(z0);
  const double rhs_exp = 8.0 * std::pow(h, 2.0 * s) * std::pow(L, 2.0 * s) * (1.0 + std::pow(z0n, 2.0 * s * s)) * lambda +
                         constant * std::pow(d, s) * std::pow(h, s) * lambda;
  return detail::mgf_from_samples("E exp(lambda sup|z_t - z0|^(2s)) <= exp{8 h^2s L^2s (1 + |z0|^(2s^2)) lambda + " +
                                      std::to_string(constant) + " d^s h^s lambda}",
                                  lambda, sups, std::exp(rhs_exp));
}

inline bool check_displacement_mgf(const PotentialSpec& spec, std::span<const double> z0, double h, double lambda, double s,
                                   std::size_t n_paths, std::uint64_t seed) {
  return check_displacement_mgf_detailed(spec, z0, h, lambda, s, n_paths, seed).holds;
}

// ---- CSV --------------------------------------------------------------------------

/// Columns particle,x0,...,x{d-1}.
inline void write_csv(std::ostream& os, const Ensemble& e) {
  os.precision(17);
  os << "particle";
  for (int j = 0; j < e.d; ++j) os << ",x" << j;
  os << '\n';
  for (std::size_t i = 0; i < e.n; ++i) {
    os << i;
    for (int j = 0; j < e.d; ++j) os << ',' << e.particles[i * e.d + j];
    os << '\n';
  }
}

/// Columns k,max_norm,mean_norm.
inline void write_csv(std::ostream& os, const std::vector<NormStat>& norms) {
  os.precision(17);
  os << "k,max_norm,mean_norm\n";
  for (const auto& s : norms) os << s.k << ',' << s.max_norm << ',' << s.mean_norm << '\n';
}

}  // namespace langevin_lab
