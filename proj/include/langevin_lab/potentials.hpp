#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace langevin_lab {

using ValueFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double norm2(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

/// Hölder smoothness of the gradient. `radius` < inf means the bound is only
/// claimed on the ball B(0, radius).
struct SmoothnessRecord {
  double s = 1.0;
  double L = 1.0;
  double radius = kInf;
};

inline void validate(const SmoothnessRecord& sm) {
  detail::require(sm.s > 0.0 && sm.s <= 1.0, "Hölder exponent s must lie in (0, 1]");
  detail::require(sm.L > 0.0 && std::isfinite(sm.L), "Hölder constant L must be positive");
  detail::require(sm.radius > 0.0, "smoothness radius must be positive");
}

enum class FIKind { PI, LSI, LO, MLSI };

inline const char* to_string(FIKind k) {
  switch (k) {
    case FIKind::PI: return "PI";
    case FIKind::LSI: return "LSI";
    case FIKind::LO: return "LO";
    case FIKind::MLSI: return "MLSI";
  }
  return "?";
}

inline FIKind fi_kind_from_string(const std::string& s) {
  if (s == "PI") return FIKind::PI;
  if (s == "LSI") return FIKind::LSI;
  if (s == "LO") return FIKind::LO;
  if (s == "MLSI") return FIKind::MLSI;
  throw precondition_error("unknown functional inequality kind '" + s + "'");
}

/// A claimed functional inequality. `alpha` is the LO order; `alpha0`,
/// `alpha1`, `C_tail` belong to MLSI with its tail condition.
struct FIConstants {
  FIKind kind = FIKind::PI;
  double C = 1.0;
  double alpha = 1.0;
  double alpha0 = 2.0;
  double alpha1 = 1.0;
  double C_tail = 1.0;
  bool log_concave = false;

  static FIConstants pi(double C, bool log_concave = false) {
    FIConstants f;
    f.kind = FIKind::PI;
    f.C = C;
    f.log_concave = log_concave;
    return f;
  }
  static FIConstants lsi(double C) {
    FIConstants f;
    f.kind = FIKind::LSI;
    f.C = C;
    f.alpha = 2.0;
    return f;
  }
  static FIConstants lo(double alpha, double C) {
    FIConstants f;
    f.kind = FIKind::LO;
    f.C = C;
    f.alpha = alpha;
    return f;
  }
  static FIConstants mlsi(double alpha0, double alpha1, double C, double C_tail) {
    FIConstants f;
    f.kind = FIKind::MLSI;
    f.C = C;
    f.alpha0 = alpha0;
    f.alpha1 = alpha1;
    f.C_tail = C_tail;
    return f;
  }

  /// LO order seen by the decay ODE: PI is LO(1), LSI is LO(2).
  double effective_alpha() const {
    if (kind == FIKind::PI) return 1.0;
    if (kind == FIKind::LSI) return 2.0;
    return alpha;
  }
};

inline void validate(const FIConstants& f) {
  detail::require(f.C > 0.0 && std::isfinite(f.C), "functional inequality constant C must be positive");
  if (f.kind == FIKind::LO)
    detail::require(f.alpha >= 1.0 && f.alpha <= 2.0, "LO order alpha must lie in [1, 2]");
  if (f.kind == FIKind::MLSI) {
    detail::require(f.alpha0 >= -1.0 && f.alpha0 <= 2.0, "MLSI order alpha0 must lie in [-1, 2]");
    // The tail order is allowed up to 2: the rate discussion takes alpha1 = alpha in (1, 2].
    detail::require(f.alpha1 > 0.0 && f.alpha1 <= 2.0, "MLSI tail order alpha1 must lie in (0, 2]");
    detail::require(f.C_tail > 0.0, "MLSI tail constant must be positive");
  }
}

/// Super Poincaré profile constant beta_alpha(s) = 96 C / ln(e + s)^(2 - 2/alpha).
inline double beta_alpha(const FIConstants& lo, double s) {
  const double a = lo.effective_alpha();
  return 96.0 * lo.C / std::pow(std::log(std::numbers::e + s), 2.0 - 2.0 / a);
}

enum class Family { power, smoothed_power, smoothed_norm, product, quadratic, perturbed_power, perturbed_quadratic, custom };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::power: return "power";
    case Family::smoothed_power: return "smoothed_power";
    case Family::smoothed_norm: return "smoothed_norm";
    case Family::product: return "product";
    case Family::quadratic: return "quadratic";
    case Family::perturbed_power: return "perturbed_power";
    case Family::perturbed_quadratic: return "perturbed_quadratic";
    case Family::custom: return "custom";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  for (Family f : {Family::power, Family::smoothed_power, Family::smoothed_norm, Family::product, Family::quadratic,
                   Family::perturbed_power, Family::perturbed_quadratic})
    if (s == to_string(f)) return f;
  throw precondition_error("unknown potential family '" + s + "'");
}

struct FamilyParams {
  double alpha = 2.0;        // power, smoothed_power, product, perturbed_power
  double s = 0.5;            // perturbed_quadratic exponent: cos(|x|^(1+s))
  double radius = 4.0;       // perturbed_quadratic: ball on which the smoothness record holds
  Eigen::MatrixXd A;         // quadratic precision; empty means identity
};

struct PotentialSpec {
  std::string id = "custom";
  Family family = Family::custom;
  int d = 1;
  ValueFn V;
  GradFn gradV;
  SmoothnessRecord smoothness;
  std::vector<FIConstants> fi;
  std::optional<double> mean_norm;
  double V_at_0 = 0.0;
  std::optional<double> min_V;
  bool convex = false;
  /// V(x) = radial(‖x‖) when set.
  std::function<double(double)> radial;
  /// V(x) = Σ coordinate(x_i) when set.
  std::function<double(double)> coordinate;
  /// Precision matrix for quadratic targets.
  std::optional<Eigen::MatrixXd> precision;

  double value(std::span<const double> x) const { return V(x); }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(x.size());
    gradV(x, g);
    return g;
  }

  /// Scalar helpers for d = 1.
  double value1(double x) const { return V(std::span<const double>(&x, 1)); }
  double grad1(double x) const {
    double g = 0.0;
    gradV(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return g;
  }

  std::optional<FIConstants> find_fi(FIKind kind) const {
    for (const auto& f : fi)
      if (f.kind == kind) return f;
    return std::nullopt;
  }
};

namespace detail {

/// Gradient of a radial function f(‖x‖) given f'(r); zero at the origin.
inline void radial_gradient(std::span<const double> x, std::span<double> g, const std::function<double(double)>& fprime) {
  const double r = norm2(x);
  if (r == 0.0) {
    std::fill(g.begin(), g.end(), 0.0);
    return;
  }
  const double c = fprime(r) / r;
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = c * x[i];
}

inline void attach_radial(PotentialSpec& spec, std::function<double(double)> f, std::function<double(double)> fprime) {
  spec.radial = f;
  spec.V = [f](std::span<const double> x) { return f(norm2(x)); };
  spec.gradV = [fprime](std::span<const double> x, std::span<double> g) { radial_gradient(x, g, fprime); };
}

/// log of ∫_0^∞ r^k exp(-f(r)) dr.
inline double log_radial_moment(const std::function<double(double)>& f, double k) {
  auto logf = [&](double r) { return r <= 0.0 ? (k == 0.0 ? -f(0.0) : -kInf) : k * std::log(r) - f(r); };
  // Locate the bulk: scan outward until the integrand is negligible.
  double r_hi = 1.0;
  double peak = logf(0.0);
  double r_peak = 0.0;
  for (int it = 0; it < 200; ++it) {
    const int n = 400;
    for (int i = 1; i <= n; ++i) {
      const double r = r_hi * i / n;
      const double v = logf(r);
      if (v > peak) {
        peak = v;
        r_peak = r;
      }
    }
    if (logf(r_hi) < peak - 60.0 && r_hi > r_peak) break;
    r_hi *= 2.0;
  }
  if (!std::isfinite(peak)) throw grid_error("radial integrand is not normalizable");
  auto integrand = [&](double r) {
    const double v = logf(r) - peak;
    return v < -745.0 ? 0.0 : std::exp(v);
  };
  boost::math::quadrature::tanh_sinh<double> quad;
  double total = 0.0;
  const double split = r_peak > 0.0 ? r_peak : r_hi / 2.0;
  total += quad.integrate(integrand, 0.0, split, 1e-13);
  total += quad.integrate(integrand, split, r_hi, 1e-13);
  // Remaining tail beyond r_hi is below e^-60 of the peak per unit length; fold it into a check.
  if (!(total > 0.0) || !std::isfinite(total)) throw grid_error("radial quadrature failed");
  return std::log(total) + peak;
}

}  // namespace detail

/// Builds one of the example target families.
inline PotentialSpec make_builtin(Family family, int d, const FamilyParams& p = {}) {
  detail::require(d >= 1, "dimension must be at least 1");
  PotentialSpec spec;
  spec.family = family;
  spec.d = d;
  spec.id = to_string(family);
  const double alpha = p.alpha;
  switch (family) {
    case Family::power: {
      detail::require(alpha > 1.0 && alpha <= 2.0, "power family requires alpha in (1, 2]");
      detail::attach_radial(
          spec, [alpha](double r) { return std::pow(r, alpha); },
          [alpha](double r) { return alpha * std::pow(r, alpha - 1.0); });
      // x -> ‖x‖^(s-1) x is (s, 2^(1-s))-Hölder.
      spec.smoothness = {alpha - 1.0, alpha * std::pow(2.0, 2.0 - alpha)};
      spec.V_at_0 = 0.0;
      spec.min_V = 0.0;
      spec.convex = true;
      if (alpha == 2.0) {
        spec.fi = {FIConstants::lsi(0.5), FIConstants::pi(0.5, true)};
      }
      break;
    }
    case Family::smoothed_power:
    case Family::smoothed_norm: {
      const double a = family == Family::smoothed_norm ? 1.0 : alpha;
      detail::require(a >= 1.0 && a <= 2.0, "smoothed power family requires alpha in [1, 2]");
      detail::attach_radial(
          spec, [a](double r) { return std::pow(1.0 + r * r, a / 2.0); },
          [a](double r) { return a * r * std::pow(1.0 + r * r, a / 2.0 - 1.0); });
      // Hessian eigenvalues are maximal at the origin, where they equal a.
      spec.smoothness = {1.0, a};
      spec.V_at_0 = 1.0;
      spec.min_V = 1.0;
      spec.convex = true;
      break;
    }
    case Family::product: {
      detail::require(alpha >= 1.0 && alpha <= 2.0, "product family requires alpha in [1, 2]");
      auto f = [alpha](double t) { return std::pow(1.0 + t * t, alpha / 2.0); };
      spec.coordinate = f;
      spec.V = [f](std::span<const double> x) {
        double acc = 0.0;
        for (double v : x) acc += f(v);
        return acc;
      };
      spec.gradV = [alpha](std::span<const double> x, std::span<double> g) {
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = alpha * x[i] * std::pow(1.0 + x[i] * x[i], alpha / 2.0 - 1.0);
      };
      if (d == 1) spec.radial = f;
      spec.smoothness = {1.0, alpha};
      spec.V_at_0 = d;
      spec.min_V = d;
      spec.convex = true;
      break;
    }
    case Family::quadratic: {
      Eigen::MatrixXd A = p.A.size() ? p.A : Eigen::MatrixXd::Identity(d, d);
      detail::require(A.rows() == d && A.cols() == d, "quadratic precision must be d x d");
      detail::require((A - A.transpose()).norm() <= 1e-12 * std::max(1.0, A.norm()), "quadratic precision must be symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
      const double lmin = es.eigenvalues().minCoeff();
      const double lmax = es.eigenvalues().maxCoeff();
      detail::require(lmin > 0.0, "quadratic precision must be positive definite");
      spec.precision = A;
      spec.V = [A](std::span<const double> x) {
        Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        return 0.5 * v.dot(A * v);
      };
      spec.gradV = [A](std::span<const double> x, std::span<double> g) {
        Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<Eigen::VectorXd> out(g.data(), static_cast<Eigen::Index>(g.size()));
        out.noalias() = A * v;
      };
      if (lmax - lmin <= 1e-14 * lmax) {
        const double a = lmax;
        spec.radial = [a](double r) { return 0.5 * a * r * r; };
      }
      spec.smoothness = {1.0, lmax};
      spec.fi = {FIConstants::lsi(1.0 / lmin), FIConstants::pi(1.0 / lmin, true)};
      spec.V_at_0 = 0.0;
      spec.min_V = 0.0;
      spec.convex = true;
      break;
    }
    case Family::perturbed_power: {
      detail::require(alpha > 1.0 && alpha <= 2.0, "perturbed power family requires alpha in (1, 2]");
      detail::attach_radial(
          spec, [alpha](double r) { return std::pow(r, alpha) + std::cos(r); },
          [alpha](double r) { return alpha * std::pow(r, alpha - 1.0) - std::sin(r); });
      // The cosine's gradient is bounded by 1 and 1-Lipschitz, hence (s, 2^(1-s))-Hölder.
      const double s = alpha - 1.0;
      spec.smoothness = {s, (alpha + 1.0) * std::pow(2.0, 1.0 - s)};
      spec.V_at_0 = 1.0;
      spec.min_V = 1.0;  // r^alpha + cos r is increasing in r
      break;
    }
    case Family::perturbed_quadratic: {
      const double s = p.s;
      detail::require(s > 0.0 && s <= 1.0, "perturbed quadratic requires s in (0, 1]");
      detail::require(p.radius > 0.0, "perturbed quadratic smoothness radius must be positive");
      const double pw = 1.0 + s;
      auto f = [pw](double r) { return 0.5 * r * r + std::cos(std::pow(r, pw)); };
      detail::attach_radial(spec, f, [pw](double r) {
        return r - pw * std::pow(r, pw - 1.0) * std::sin(std::pow(r, pw));
      });
      // Not globally Hölder: the perturbation's Hessian grows like r^(2s). Record a bound on B(0, radius).
      const double grow = std::max(1.0, std::pow(p.radius, 2.0 * s));
      spec.smoothness = {1.0, 1.0 + pw * (pw - 1.0) * grow + pw * pw * grow, p.radius};
      spec.V_at_0 = 1.0;
      {
        // Radial minimum: scan then refine with Brent.
        double best_r = 0.0, best_v = f(0.0);
        const double r_max = 4.0 + 2.0 * std::pow(std::numbers::pi, 1.0 / pw);
        for (int i = 1; i <= 20000; ++i) {
          const double r = r_max * i / 20000.0;
          if (f(r) < best_v) {
            best_v = f(r);
            best_r = r;
          }
        }
        const double step = r_max / 20000.0;
        auto res = boost::math::tools::brent_find_minima(f, std::max(0.0, best_r - step), best_r + step, 52);
        spec.min_V = std::min(best_v, res.second);
      }
      break;
    }
    case Family::custom:
      throw precondition_error("custom potentials are built directly, not through make_builtin");
  }
  if (spec.radial) spec.mean_norm = std::exp(detail::log_radial_moment(spec.radial, d) - detail::log_radial_moment(spec.radial, d - 1));
  else if (spec.precision && d == 1) spec.mean_norm = std::sqrt(2.0 / std::numbers::pi / (*spec.precision)(0, 0));
  return spec;
}

inline PotentialSpec make_builtin(const std::string& family, int d, const FamilyParams& p = {}) {
  return make_builtin(family_from_string(family), d, p);
}

/// V̂ = V + (γ/2)(‖x‖ − R)₊².
struct ModifiedPotential {
  PotentialSpec base;
  double gamma = 1.0;
  double R = 1.0;

  double value(std::span<const double> x) const {
    const double excess = std::max(0.0, norm2(x) - R);
    return base.V(x) + 0.5 * gamma * excess * excess;
  }

  void gradient(std::span<const double> x, std::span<double> g) const {
    base.gradV(x, g);
    const double r = norm2(x);
    if (r > R) {
      const double c = gamma * (r - R) / r;
      for (std::size_t i = 0; i < x.size(); ++i) g[i] += c * x[i];
    }
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(x.size());
    gradient(x, g);
    return g;
  }

  /// Gradient-growth bound L + (L + γ)‖x‖.
  double gradient_growth_bound(std::span<const double> x) const {
    return base.smoothness.L + (base.smoothness.L + gamma) * norm2(x);
  }

  /// The modified target as a standalone spec. The hinge adds a γ-Lipschitz
  /// gradient term, so the recorded (s, L + γ) is a valid Hölder record only for s = 1.
  PotentialSpec as_spec() const {
    PotentialSpec out;
    out.id = base.id + "_modified";
    out.family = Family::custom;
    out.d = base.d;
    auto self = *this;
    out.V = [self](std::span<const double> x) { return self.value(x); };
    out.gradV = [self](std::span<const double> x, std::span<double> g) { self.gradient(x, g); };
    out.smoothness = {base.smoothness.s, base.smoothness.L + gamma, base.smoothness.radius};
    out.V_at_0 = base.V_at_0;
    out.min_V = base.min_V;
    out.convex = base.convex;
    if (base.radial) {
      auto f = base.radial;
      const double g = gamma, RR = R;
      out.radial = [f, g, RR](double r) {
        const double e = std::max(0.0, r - RR);
        return f(r) + 0.5 * g * e * e;
      };
      out.mean_norm = std::exp(detail::log_radial_moment(out.radial, base.d) - detail::log_radial_moment(out.radial, base.d - 1));
    }
    return out;
  }
};

inline ModifiedPotential make_modified(const PotentialSpec& base, double gamma, double R) {
  detail::require(gamma > 0.0, "modified potential requires gamma > 0");
  detail::require(base.mean_norm.has_value(), "modified potential requires the base mean norm");
  const double floor = std::max(1.0, 2.0 * *base.mean_norm);
  if (!(R >= floor))
    throw precondition_error("modified potential radius R = " + std::to_string(R) + " is below max{1, 2m} = " +
                             std::to_string(floor));
  return ModifiedPotential{base, gamma, R};
}

struct MeanNormOptions {
  std::size_t grid_n = 4001;     // cells per axis for d <= 2 grid quadrature
  std::size_t n_samples = 200000;  // Monte Carlo fallback for d > 2
  std::uint64_t seed = 0;
};

struct MeanNormEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero for deterministic quadrature
  std::string method;
};

namespace detail {

/// Half-width of a box outside which exp(-(V - V(0))) is below e^-50 along axes and diagonals.
inline double auto_window(const PotentialSpec& spec) {
  std::vector<double> x(spec.d, 0.0);
  const double v0 = spec.V(x);
  double w = 1.0;
  for (int it = 0; it < 60; ++it, w *= 1.5) {
    bool ok = true;
    for (int dir = 0; dir < 2 * spec.d + 2 && ok; ++dir) {
      std::fill(x.begin(), x.end(), 0.0);
      if (dir < 2 * spec.d) x[dir / 2] = dir % 2 ? -w : w;
      else std::fill(x.begin(), x.end(), dir % 2 ? -w : w);
      ok = spec.V(x) - v0 > 50.0;
    }
    if (ok) return w;
  }
  throw grid_error("potential does not grow fast enough for a finite quadrature window");
}

}  // namespace detail

/// m = ∫‖x‖ dπ. Radial targets use 1D quadrature of r^(d-1) e^(-V(r)); d ≤ 2
/// uses a midpoint grid; otherwise Monte Carlo with exact sampling when the
/// target is Gaussian or a product.
inline MeanNormEstimate estimate_mean_norm_detailed(const PotentialSpec& spec, const MeanNormOptions& opt = {}) {
  if (spec.radial) {
    const double lm = detail::log_radial_moment(spec.radial, spec.d) - detail::log_radial_moment(spec.radial, spec.d - 1);
    return {std::exp(lm), 0.0, "radial_quadrature"};
  }
  if (spec.d <= 2) {
    const double w = detail::auto_window(spec);
    const std::size_t n = opt.grid_n;
    const double dx = 2.0 * w / static_cast<double>(n);
    std::vector<double> x(spec.d, 0.0);
    const double v0 = spec.V(x);
    double mass = 0.0, moment = 0.0, edge = 0.0;
    const std::size_t ny = spec.d == 2 ? n : 1;
    for (std::size_t i = 0; i < n; ++i) {
      x[0] = -w + (static_cast<double>(i) + 0.5) * dx;
      for (std::size_t j = 0; j < ny; ++j) {
        if (spec.d == 2) x[1] = -w + (static_cast<double>(j) + 0.5) * dx;
        const double p = std::exp(-(spec.V(x) - v0));
        mass += p;
        moment += p * norm2(x);
        if (i == 0 || i + 1 == n || (spec.d == 2 && (j == 0 || j + 1 == ny))) edge += p;
      }
    }
    if (!(mass > 0.0) || edge > 1e-12 * mass) throw grid_error("mean-norm quadrature window does not contain the target");
    return {moment / mass, 0.0, "grid_quadrature"};
  }
  if (spec.precision || spec.coordinate) {
    const int d = spec.d;
    Eigen::MatrixXd chol;
    std::vector<double> cdf_x, cdf_u;
    if (spec.precision) {
      chol = Eigen::LLT<Eigen::MatrixXd>(spec.precision->inverse()).matrixL();
    } else {
      // Tabulated 1D CDF of exp(-coordinate) for inverse-CDF sampling.
      PotentialSpec one;
      one.d = 1;
      auto f = spec.coordinate;
      one.V = [f](std::span<const double> x) { return f(x[0]); };
      const double w = detail::auto_window(one);
      const std::size_t n = 200001;
      cdf_x.resize(n + 1);
      cdf_u.resize(n + 1);
      const double dx = 2.0 * w / static_cast<double>(n);
      const double f0 = f(0.0);
      cdf_x[0] = -w;
      cdf_u[0] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double c = -w + (static_cast<double>(i) + 0.5) * dx;
        cdf_x[i + 1] = -w + static_cast<double>(i + 1) * dx;
        cdf_u[i + 1] = cdf_u[i] + std::exp(-(f(c) - f0));
      }
      for (auto& u : cdf_u) u /= cdf_u.back();
    }
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> z(d), x(d);
    for (std::size_t k = 0; k < opt.n_samples; ++k) {
      rng::NormalBlock nb(opt.seed, rng::Stream::mean_norm, k, 0);
      if (spec.precision) {
        nb.fill(z);
        Eigen::Map<Eigen::VectorXd> zv(z.data(), d);
        Eigen::Map<Eigen::VectorXd> xv(x.data(), d);
        xv.noalias() = chol * zv;
      } else {
        for (int i = 0; i < d; ++i) {
          const double u = nb.uniform(static_cast<std::uint32_t>(i));
          const auto it = std::upper_bound(cdf_u.begin(), cdf_u.end(), u);
          const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf_u.begin()), 1, cdf_u.size() - 1);
          const double t = (u - cdf_u[j - 1]) / std::max(cdf_u[j] - cdf_u[j - 1], 1e-300);
          x[i] = cdf_x[j - 1] + t * (cdf_x[j] - cdf_x[j - 1]);
        }
      }
      const double r = norm2(x);
      sum += r;
      sum2 += r * r;
    }
    const double n = static_cast<double>(opt.n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean, std::sqrt(var / n), "monte_carlo"};
  }
  throw precondition_error("mean norm of a non-radial target in d > 2 must be declared");
}

inline double estimate_mean_norm(const PotentialSpec& spec, const MeanNormOptions& opt = {}) {
  return estimate_mean_norm_detailed(spec, opt).value;
}

struct HolderReport {
  double max_ratio = 0.0;
  double declared_L = 0.0;
  double s = 1.0;
  bool violation = false;
  std::vector<double> worst_x, worst_y;
  std::size_t n_pairs = 0;
};

/// Sampled-pair estimate of sup ‖∇V(x) − ∇V(y)‖ / ‖x − y‖^s. Pairs mix
/// independent draws, near-antipodal draws and close neighbours over scales 1e-3..1e2.
inline HolderReport verify_holder(const PotentialSpec& spec, std::size_t n_pairs, std::uint64_t seed,
                                  std::optional<double> declared_L = std::nullopt) {
  detail::require(n_pairs >= 1, "verify_holder needs at least one pair");
  const int d = spec.d;
  const double s = spec.smoothness.s;
  HolderReport rep;
  rep.s = s;
  rep.declared_L = declared_L.value_or(spec.smoothness.L);
  rep.n_pairs = n_pairs;
  std::vector<double> x(d), y(d), gx(d), gy(d), z(d);
  const double ball = spec.smoothness.radius;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    rng::NormalBlock nb(seed, rng::Stream::holder_pairs, k, 0);
    const double scale = std::pow(10.0, -3.0 + 5.0 * nb.uniform(0));
    const int mode = static_cast<int>(k % 3);
    nb.fill(z);
    for (int i = 0; i < d; ++i) x[i] = scale * z[i];
    rng::NormalBlock nb2(seed, rng::Stream::holder_pairs, k, 1);
    nb2.fill(z);
    for (int i = 0; i < d; ++i) {
      if (mode == 0) y[i] = scale * z[i];
      else if (mode == 1) y[i] = -x[i] * (1.0 + 0.05 * nb.uniform(1 + i) - 0.025) + 0.01 * scale * z[i];
      else y[i] = x[i] + 1e-3 * scale * z[i];
    }
    if (std::isfinite(ball)) {
      for (auto* v : {&x, &y}) {
        const double r = norm2(*v);
        if (r > ball)
          for (auto& c : *v) c *= ball / r;
      }
    }
    double dist = 0.0;
    for (int i = 0; i < d; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
    dist = std::sqrt(dist);
    if (dist == 0.0) continue;
    spec.gradV(x, gx);
    spec.gradV(y, gy);
    double dg = 0.0;
    for (int i = 0; i < d; ++i) dg += (gx[i] - gy[i]) * (gx[i] - gy[i]);
    const double ratio = std::sqrt(dg) / std::pow(dist, s);
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_x = x;
      rep.worst_y = y;
    }
  }
  rep.violation = rep.max_ratio > rep.declared_L * (1.0 + 1e-9);
  return rep;
}

/// Largest relative error between gradV and a central finite difference of V
/// over `n_probes` Gaussian probe points (scale `scale`). Relative to max(‖∇V‖, 1).
inline double gradient_fd_error(const PotentialSpec& spec, std::size_t n_probes, std::uint64_t seed, double scale = 2.0) {
  const int d = spec.d;
  std::vector<double> x(d), g(d), xp(d);
  double worst = 0.0;
  for (std::size_t k = 0; k < n_probes; ++k) {
    rng::NormalBlock nb(seed, rng::Stream::holder_pairs, k, 7);
    nb.fill(x);
    for (auto& v : x) v *= scale;
    spec.gradV(x, g);
    double err = 0.0, gn = 0.0;
    for (int i = 0; i < d; ++i) {
      const double step = 1e-5 * std::max(1.0, std::abs(x[i]));
      xp = x;
      xp[i] = x[i] + step;
      const double vp = spec.V(xp);
      xp[i] = x[i] - step;
      const double vm = spec.V(xp);
      const double fd = (vp - vm) / (2.0 * step);
      err += (fd - g[i]) * (fd - g[i]);
      gn += g[i] * g[i];
    }
    worst = std::max(worst, std::sqrt(err) / std::max(std::sqrt(gn), 1.0));
  }
  return worst;
}

}  // namespace langevin_lab
