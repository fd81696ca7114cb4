#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "decay_curve.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "gaussian_law.hpp"
#include "potentials.hpp"

namespace langevin_lab {

struct PlanRequest {
  double eps = 0.1;
  double q = 2.0;
  int d = 1;
  FIConstants fi;
  SmoothnessRecord smooth;
  /// Rényi divergence at initialization in the order the invoked theorem uses
  /// (R_2 for LSI, R_q for log-concave, R_(2q-1) for LO, R_2q for MLSI).
  double R0 = 1.0;
  /// Mean norm ∫‖·‖dπ.
  double m = 1.0;
  /// R_2(μ0 ‖ π̂) against the modified target; defaults to R0.
  std::optional<double> R0_hat;
};

/// N is stored as a double holding an integer value: iteration counts in the
/// scaling regime overflow 64-bit integers.
struct Plan {
  std::string theorem;
  double h = 0.0;
  double N = 0.0;
  double T = 0.0;
  double N0 = 0.0;
  std::vector<std::string> regime_notes;
  std::vector<InequalityCheck> preconditions;

  bool preconditions_hold() const {
    return std::all_of(preconditions.begin(), preconditions.end(), [](const auto& c) { return c.holds; });
  }
};

namespace detail {

inline void validate(const PlanRequest& r) {
  require(r.eps > 0.0 && std::isfinite(r.eps), "eps must be positive");
  require(r.q >= 2.0, "Rényi order q must be at least 2");
  require(r.d >= 1, "dimension must be at least 1");
  require(r.R0 >= 0.0 && std::isfinite(r.R0), "initial divergence R0 must be nonnegative");
  require(r.m > 0.0, "mean norm must be positive");
  ::langevin_lab::validate(r.fi);
  ::langevin_lab::validate(r.smooth);
}

/// Polylogarithmic factors are instantiated as ln(e + x).
inline double polylog(double x) { return std::log(std::numbers::e + x); }

inline void finish(Plan& p) {
  p.N = std::max(1.0, p.N);
  p.T = p.N * p.h;
}

}  // namespace detail

/// LSI + gradient-Lipschitz plan with the explicit proof constants.
inline Plan plan_lsi(const PlanRequest& req) {
  detail::validate(req);
  detail::require(req.fi.kind == FIKind::LSI, "plan_lsi needs an LSI claim");
  detail::require(req.smooth.s == 1.0, "plan_lsi needs a Lipschitz gradient (s = 1)");
  const double q = req.q, C = req.fi.C, L = req.smooth.L, d = req.d, eps = req.eps;
  Plan p;
  p.theorem = "lsi";
  const double h_stab = std::nextafter(1.0 / (192.0 * q * q * C * L * L), 0.0);
  const double h_eps = eps / (172.0 * d * q * q * C * L * L);
  p.h = std::min(h_stab, h_eps);
  p.regime_notes.push_back(h_eps < h_stab ? "h on the accuracy branch eps/(172 d q^2 C L^2)"
                                          : "h pinned at the stability branch 1/(192 q^2 C L^2)");
  p.N0 = std::max(0.0, std::ceil(2.0 * C / p.h * std::log((q - 1.0) / 2.0)));
  if (p.N0 == 0.0) p.regime_notes.push_back("waiting phase N0 is empty since ln((q-1)/2) <= 0");
  const double decay = std::max(0.0, std::ceil(2.0 * q * C / p.h * std::log(2.0 * req.R0 / eps)));
  if (decay == 0.0) p.regime_notes.push_back("initial divergence already below eps/2");
  p.N = p.N0 + decay;
  detail::finish(p);
  p.preconditions.push_back(check_le("h < 1/(192 q^2 C L^2)", p.h, h_stab, 0.0));
  p.preconditions.back().holds = p.h < 1.0 / (192.0 * q * q * C * L * L);
  p.preconditions.push_back(check_le("86 d h q^2 C L^2 <= eps/2", 86.0 * d * p.h * q * q * C * L * L, eps / 2.0, 1e-15 * eps));
  return p;
}

/// Step-size constraints of the log-concave plan for a given N.
struct LogConcaveConstraints {
  double stability = 0.0;     // 1/(3L)
  double phase_one = 0.0;     // 1/(172 d q^2 C L^2)
  double accuracy = 0.0;      // eps/(176 d q^2 C L^2)
  double lsi_growth = 0.0;    // (1/(384 q L √N)) min(1, √N/(q L^2))
  double min() const { return std::min({stability, phase_one, accuracy, lsi_growth}); }
};

inline LogConcaveConstraints log_concave_constraints(const PlanRequest& r, double N) {
  const double q = r.q, C = r.fi.C, L = r.smooth.L, d = r.d;
  LogConcaveConstraints c;
  c.stability = 1.0 / (3.0 * L);
  c.phase_one = 1.0 / (172.0 * d * q * q * C * L * L);
  c.accuracy = r.eps / (176.0 * d * q * q * C * L * L);
  const double sn = std::sqrt(N);
  c.lsi_growth = 1.0 / (384.0 * q * L * sn) * std::min(1.0, sn / (q * L * L));
  return c;
}

/// Log-concave + gradient-Lipschitz plan. The h ↔ N dependence is resolved by
/// fixed-point iteration from N = 1, capped at 100 rounds.
inline Plan plan_log_concave(const PlanRequest& req) {
  detail::validate(req);
  detail::require(req.fi.kind == FIKind::PI && req.fi.log_concave, "plan_log_concave needs a PI claim flagged log-concave");
  detail::require(req.smooth.s == 1.0, "plan_log_concave needs a Lipschitz gradient (s = 1)");
  const double q = req.q, C = req.fi.C;
  auto n_for = [&](double h, double& n0) {
    n0 = std::ceil(4.0 * q * C * req.R0 / h);
    return n0 + 1.0 + std::max(0.0, std::ceil(2.0 * q * C / h * std::log(2.0 / req.eps)));
  };
  Plan p;
  p.theorem = "log_concave";
  double N = 1.0;
  bool converged = false;
  for (int round = 0; round < 100; ++round) {
    const double h = log_concave_constraints(req, N).min();
    double n0 = 0.0;
    const double next = n_for(h, n0);
    p.h = h;
    p.N0 = n0;
    if (next == N) {
      converged = true;
      p.regime_notes.push_back("fixed point reached after " + std::to_string(round + 1) + " rounds");
      break;
    }
    N = next;
  }
  if (!converged) throw convergence_error("log-concave plan: h/N fixed point did not converge in 100 rounds");
  p.N = N;
  detail::finish(p);
  const auto c = log_concave_constraints(req, p.N);
  const double h = p.h;
  if (h == c.stability) p.regime_notes.push_back("active constraint: h <= 1/(3L)");
  if (h == c.phase_one) p.regime_notes.push_back("active constraint: h <= 1/(172 d q^2 C L^2)");
  if (h == c.accuracy) p.regime_notes.push_back("active constraint: h <= eps/(176 d q^2 C L^2)");
  if (h == c.lsi_growth) p.regime_notes.push_back("active constraint: h <= (1/(384 q L sqrt N)) min(1, sqrt N/(q L^2))");
  p.preconditions.push_back(check_le("h <= 1/(3L)", h, c.stability, 0.0));
  p.preconditions.push_back(check_le("h <= 1/(172 d q^2 C L^2)", h, c.phase_one, 0.0));
  p.preconditions.push_back(check_le("h <= eps/(176 d q^2 C L^2)", h, c.accuracy, 0.0));
  p.preconditions.push_back(check_le("h <= (1/(384 q L sqrt N)) min(1, sqrt N/(q L^2))", h, c.lsi_growth, 0.0));
  p.preconditions.push_back(check_le("N0 <= 4 q C R0 / h", p.N0, 4.0 * q * C * req.R0 / h, 1.0));
  p.preconditions.push_back(
      {"N >= N0 + 1 + (2 q C/h) ln(2/eps)", p.N, p.N0 + 1.0 + 2.0 * q * C / h * std::log(2.0 / req.eps),
       p.N >= p.N0 + 1.0 + 2.0 * q * C / h * std::log(2.0 / req.eps)});
  return p;
}

/// Continuous-time horizon after which R_order(π_T‖π) <= eps_target under
/// LO(alpha): 68 order C ((R0^(2/α−1) − 1)/(2/α − 1) + ln(1/eps_target)), with
/// the ln R0 limit at α = 2. The first phase is empty when R0 <= 1.
inline double lo_horizon(double order, double C, double alpha, double R0, double eps_target) {
  detail::require(alpha >= 1.0 && alpha <= 2.0, "LO order must lie in [1, 2]");
  detail::require(eps_target > 0.0, "target accuracy must be positive");
  const double k = 2.0 / alpha - 1.0;
  double phase_one = 0.0;
  if (R0 > 1.0) phase_one = k == 0.0 ? std::log(R0) : std::expm1(k * std::log(R0)) / k;
  return 68.0 * order * C * (phase_one + std::max(0.0, std::log(1.0 / eps_target)));
}

/// LO + Hölder plan: horizon from the LO continuous-time lemma at order 2q−1 and
/// target eps/2; step size from the final step-size formula with unit constants.
inline Plan plan_lo(const PlanRequest& req) {
  detail::validate(req);
  detail::require(req.fi.kind == FIKind::LO, "plan_lo needs an LO claim");
  const double s = req.smooth.s, alpha = req.fi.alpha;
  if (s + 1.0 < alpha)
    throw precondition_error("LO order and Hölder exponent must satisfy s+1 >= alpha (s = " + std::to_string(s) +
                             ", alpha = " + std::to_string(alpha) + ")");
  const double q = req.q, C = req.fi.C, L = req.smooth.L, d = req.d;
  const double eps2 = req.eps / 2.0;
  const double R = std::max(1.0, req.R0);
  const double Rhat = std::max(1.0, req.R0_hat.value_or(req.R0));
  Plan p;
  p.theorem = "lo";
  p.T = lo_horizon(2.0 * q - 1.0, C, alpha, req.R0, eps2);
  const double k = 2.0 / alpha - 1.0;
  const double lead = std::pow(eps2, 1.0 / s) /
                      (d * std::pow(q, 2.0 / s) * std::pow(C, 1.0 / s) * std::pow(L, 2.0 / s) * std::pow(R, k / s));
  const double cands[4] = {1.0, 1.0 / std::pow(q * eps2, 1.0 / s), d / std::pow(req.m, s), d / std::pow(Rhat, s / 2.0)};
  const auto it = std::min_element(std::begin(cands), std::end(cands));
  static const char* names[4] = {"1", "1/(q eps)^(1/s)", "d/m^s", "d/R2hat^(s/2)"};
  p.regime_notes.push_back(std::string("step-size min branch: ") + names[it - std::begin(cands)]);
  p.h = lead * *it / detail::polylog(d * R / eps2);
  const double horizon = p.T;
  p.N = std::max(1.0, std::ceil(horizon / p.h));
  detail::finish(p);
  p.preconditions.push_back(check_le("alpha <= s + 1", alpha, s + 1.0, 0.0));
  p.preconditions.push_back(check_le("T_required <= N h", horizon, p.T, 1e-12 * horizon));
  return p;
}

/// MLSI + tail + Hölder plan with unit constants and instantiated polylogs.
inline Plan plan_mlsi(const PlanRequest& req) {
  detail::validate(req);
  detail::require(req.fi.kind == FIKind::MLSI, "plan_mlsi needs an MLSI claim");
  const double s = req.smooth.s, q = req.q, C = req.fi.C, Ct = req.fi.C_tail, L = req.smooth.L, d = req.d;
  const double a0 = req.fi.alpha0, a1 = req.fi.alpha1;
  const double eps2 = req.eps / 2.0;
  const double qq = 2.0 * q - 1.0;
  const double R = std::max(1.0, req.R0);
  const double Rhat = std::max(1.0, req.R0_hat.value_or(req.R0));
  Plan p;
  p.theorem = "mlsi";
  const double scale = req.m + qq * Ct * std::pow(R, 1.0 / a1) + Ct * std::pow(detail::polylog(d / eps2), 1.0 / a1);
  p.T = qq * C * C * std::pow(scale, 2.0 - a0) * detail::polylog(R / eps2);
  const double lead = std::pow(eps2, 1.0 / s) /
                      (d * std::pow(q, (4.0 - a0) / s) * std::pow(C, 2.0 / s) * std::pow(Ct, (2.0 - a0) / s) *
                       std::pow(L, 2.0 / s) * std::pow(R, (2.0 - a0) / (a1 * s)));
  const double cands[5] = {1.0, 1.0 / std::pow(q * eps2, 1.0 / s), d / std::pow(req.m, s), d / std::pow(Rhat, s / 2.0),
                           std::pow(std::pow(R, 1.0 / a1) / req.m, (2.0 - a0) / s)};
  const auto it = std::min_element(std::begin(cands), std::end(cands));
  static const char* names[5] = {"1", "1/(q eps)^(1/s)", "d/m^s", "d/R2hat^(s/2)", "(R^(1/alpha1)/m)^((2-alpha0)/s)"};
  p.regime_notes.push_back(std::string("step-size min branch: ") + names[it - std::begin(cands)]);
  p.regime_notes.push_back("moment exponent choice p ~ ln(d/eps) folded into the ln(e + d/eps) term");
  p.h = lead * *it / detail::polylog(d * R / eps2);
  const double horizon = p.T;
  p.N = std::max(1.0, std::ceil(horizon / p.h));
  detail::finish(p);
  p.preconditions.push_back(check_le("T_required <= N h", horizon, p.T, 1e-12 * horizon));
  return p;
}

/// Upper-bound prediction of R_q(π_t‖π) from the continuous-time differential
/// inequalities, integrated by RK4 (step <= qC/1000) with the R = 1 crossing located exactly.
inline DecayCurve predict_continuous_decay(const FIConstants& fi, double q, double R0, const std::vector<double>& t_grid) {
  validate(fi);
  detail::require(fi.kind != FIKind::MLSI, "decay prediction covers PI, LSI and LO");
  detail::require(R0 >= 0.0, "R0 must be nonnegative");
  detail::require(std::is_sorted(t_grid.begin(), t_grid.end()) && (t_grid.empty() || t_grid.front() >= 0.0),
                  "time grid must be sorted and nonnegative");
  const double C = fi.C;
  // rate(R, upper) for the phase R >= 1 (upper) or R <= 1.
  auto rhs = [&](double R, bool upper) {
    R = std::max(R, 0.0);
    switch (fi.kind) {
      case FIKind::LSI: return -2.0 / (q * C) * R;
      case FIKind::PI: return upper ? -2.0 / (q * C) : -2.0 / (q * C) * R;
      default: {
        const double c = 1.0 / (68.0 * q * C);
        return upper ? -c * std::pow(R, 2.0 - 2.0 / fi.alpha) : -c * R;
      }
    }
  };
  auto rk4 = [&](double R, double dt, bool upper) {
    const double k1 = rhs(R, upper);
    const double k2 = rhs(R + 0.5 * dt * k1, upper);
    const double k3 = rhs(R + 0.5 * dt * k2, upper);
    const double k4 = rhs(R + dt * k3, upper);
    return R + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  const double max_dt = q * C / 1000.0;
  DecayCurve out;
  out.q = q;
  out.meta["source"] = "predict_continuous_decay";
  out.meta["fi"] = to_string(fi.kind);
  double t = 0.0, R = R0;
  bool upper = R0 > 1.0;
  for (double target : t_grid) {
    while (t < target) {
      const double dt = std::min(max_dt, target - t);
      double next = rk4(R, dt, upper);
      if (upper && next <= 1.0) {
        // Bisect the sub-step at which R reaches 1, then switch phase.
        double lo = 0.0, hi = dt;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, t); ++it) {
          const double mid = 0.5 * (lo + hi);
          (rk4(R, mid, true) > 1.0 ? lo : hi) = mid;
        }
        const double tau = hi;
        R = 1.0;
        upper = false;
        if (dt - tau > 0.0) R = rk4(R, dt - tau, false);
        t += dt;
        continue;
      }
      R = next;
      t += dt;
    }
    out.times.push_back(target);
    out.values.push_back(R);
  }
  return out;
}

enum class InitVariant { convex, general, modified };

inline const char* to_string(InitVariant v) {
  switch (v) {
    case InitVariant::convex: return "convex";
    case InitVariant::general: return "general";
    case InitVariant::modified: return "modified";
  }
  return "?";
}

struct InitDesign {
  GaussianLaw law;
  double bound = 0.0;        // upper bound on R_inf(μ0 ‖ π) (or ‖ π̂ for the modified variant)
  double mean_norm = 0.0;    // m (or m̂) entering the bound
  std::string formula;
};

/// Gaussian initialization with its R_inf bound. The modified variant needs
/// γ and R; m̂ is computed exactly for radial targets and otherwise replaced by
/// the explicit upper bound R + sqrt(2π/γ).
inline InitDesign init_design(const PotentialSpec& spec, InitVariant variant, double gamma = 0.0, double R = 0.0) {
  detail::require(spec.mean_norm.has_value(), "init_design needs the mean norm");
  const double L = spec.smoothness.L;
  const int d = spec.d;
  const double dd = d;
  InitDesign out;
  switch (variant) {
    case InitVariant::convex: {
      detail::require(spec.convex, "convex initialization needs a convex potential");
      detail::require(spec.smoothness.s == 1.0, "convex initialization needs a Lipschitz gradient");
      const double m = *spec.mean_norm;
      out.law = GaussianLaw::isotropic(d, 1.0 / L);
      out.mean_norm = m;
      out.bound = 2.0 + dd / 2.0 * std::log(2.0 * m * m * L);
      out.formula = "2 + (d/2) ln(2 m^2 L)";
      break;
    }
    case InitVariant::general: {
      detail::require(spec.min_V.has_value(), "general initialization needs min V");
      const double m = *spec.mean_norm;
      out.law = GaussianLaw::isotropic(d, 1.0 / (2.0 * L));
      out.mean_norm = m;
      out.bound = 2.0 + L + spec.V_at_0 - *spec.min_V + dd / 2.0 * std::log(4.0 * m * m * L);
      out.formula = "2 + L + V(0) - min V + (d/2) ln(4 m^2 L)";
      break;
    }
    case InitVariant::modified: {
      detail::require(spec.min_V.has_value(), "modified initialization needs min V");
      const auto mod = make_modified(spec, gamma, R);
      const auto mspec = mod.as_spec();
      const double mhat = mspec.mean_norm ? *mspec.mean_norm : R + std::sqrt(2.0 * std::numbers::pi / gamma);
      out.law = GaussianLaw::isotropic(d, 1.0 / (2.0 * L + gamma));
      out.mean_norm = mhat;
      out.bound = 2.0 + L + gamma / 2.0 + spec.V_at_0 - *spec.min_V + dd / 2.0 * std::log(4.0 * mhat * mhat * L);
      out.formula = mspec.mean_norm ? "2 + L + gamma/2 + V(0) - min V + (d/2) ln(4 mhat^2 L), mhat exact"
                                    : "2 + L + gamma/2 + V(0) - min V + (d/2) ln(4 mhat^2 L), mhat <= R + sqrt(2 pi/gamma)";
      break;
    }
  }
  return out;
}

}  // namespace langevin_lab
