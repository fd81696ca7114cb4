#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "gaussian_law.hpp"
#include "grid_density.hpp"

namespace langevin_lab {

/// A divergence value in nats; +inf when the first law is not absolutely
/// continuous with respect to the second (or the Gaussian integral diverges).
struct DivergenceReport {
  double q = 2.0;
  double value = 0.0;
  std::string method;
  bool finite() const { return std::isfinite(value); }
};

/// Outcome of a deterministic inequality lhs <= rhs (+ slack).
struct InequalityCheck {
  std::string relation;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  explicit operator bool() const { return holds; }
};

inline InequalityCheck check_le(std::string relation, double lhs, double rhs, double slack) {
  const bool ok = (lhs <= rhs + slack) || (std::isinf(rhs) && rhs > 0);
  return {std::move(relation), lhs, rhs, ok};
}

namespace detail {
inline void require_order(double q) { require(q > 1.0 && std::isfinite(q), "Rényi order q must exceed 1"); }
}  // namespace detail

// ---- grid divergences -------------------------------------------------------

/// R_q(mu‖pi) = 1/(q-1) ln Σ mu_i^q pi_i^(1-q), accumulated in log space.
inline DivergenceReport renyi_grid(double q, const GridDensity& mu, const GridDensity& pi) {
  detail::require_order(q);
  require_same_grid(mu, pi);
  const double inf = std::numeric_limits<double>::infinity();
  double mx = -inf;
  std::vector<double> terms;
  terms.reserve(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = mu.values[k], p = pi.values[k];
    if (m <= 0.0) continue;
    if (p <= 0.0) return {q, inf, "grid"};
    const double t = q * std::log(m) - (q - 1.0) * std::log(p);
    terms.push_back(t);
    mx = std::max(mx, t);
  }
  if (terms.empty()) throw grid_error("first density has no mass");
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  const double value = (mx + std::log(acc)) / (q - 1.0);
  return {q, std::max(0.0, value), "grid"};
}

inline double kl_grid(const GridDensity& mu, const GridDensity& pi) {
  require_same_grid(mu, pi);
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = mu.values[k], p = pi.values[k];
    if (m <= 0.0) continue;
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    acc += m * (std::log(m) - std::log(p));
  }
  return std::max(0.0, acc);
}

inline double chi2_grid(const GridDensity& mu, const GridDensity& pi) {
  require_same_grid(mu, pi);
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = mu.values[k], p = pi.values[k];
    if (p <= 0.0) {
      if (m > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    acc += (m - p) * (m - p) / p;
  }
  return acc;
}

inline double tv_grid(const GridDensity& mu, const GridDensity& pi) {
  require_same_grid(mu, pi);
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) acc += std::abs(mu.values[k] - pi.values[k]);
  return 0.5 * acc;
}

/// R_inf(mu‖pi) = ln max mu_i / pi_i.
inline double renyi_inf_grid(const GridDensity& mu, const GridDensity& pi) {
  require_same_grid(mu, pi);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double m = mu.values[k], p = pi.values[k];
    if (m <= 0.0) continue;
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    best = std::max(best, std::log(m) - std::log(p));
  }
  return best;
}

// ---- Gaussian closed forms ---------------------------------------------------

namespace detail {

/// Whitening of g1 against g2: eigenpairs of L^-1 (S1 - S2) L^-T with S2 = L L^T,
/// plus the whitened mean difference L^-1 (m1 - m2).
struct Whitened {
  Eigen::VectorXd delta;
  Eigen::MatrixXd Q;
  Eigen::VectorXd dm;
  double logdet2 = 0.0;
};

inline Whitened whiten(const GaussianLaw& g1, const GaussianLaw& g2) {
  require(g1.dim() == g2.dim(), "Gaussian laws must have equal dimension");
  validate(g1);
  validate(g2);
  Eigen::LLT<Eigen::MatrixXd> llt(g2.cov);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd diff = g1.cov - g2.cov;
  Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(diff);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  Whitened w;
  w.delta = es.eigenvalues();
  w.Q = es.eigenvectors();
  w.dm = L.triangularView<Eigen::Lower>().solve(g1.mean - g2.mean);
  for (Eigen::Index i = 0; i < L.rows(); ++i) w.logdet2 += 2.0 * std::log(L(i, i));
  return w;
}

}  // namespace detail

/// R_q(N(m1,S1) ‖ N(m2,S2)) =
///   (q/2) Δmᵀ Σ_q⁻¹ Δm − 1/(2(q−1)) ln[det Σ_q / (det S1^(1−q) det S2^q)],
/// Σ_q = q S2 + (1−q) S1, evaluated through the whitened eigenvalues δ_i so that
/// nearly equal laws keep full relative precision. +inf when Σ_q is not positive definite.
inline DivergenceReport renyi_gaussian(double q, const GaussianLaw& g1, const GaussianLaw& g2) {
  detail::require_order(q);
  const auto w = detail::whiten(g1, g2);
  double logdet_term = 0.0;
  double quad = 0.0;
  const Eigen::VectorXd proj = w.Q.transpose() * w.dm;
  for (Eigen::Index i = 0; i < w.delta.size(); ++i) {
    const double a = 1.0 - (q - 1.0) * w.delta(i);
    if (!(a > 0.0)) return {q, std::numeric_limits<double>::infinity(), "gaussian_closed_form"};
    logdet_term += std::log1p(-(q - 1.0) * w.delta(i)) + (q - 1.0) * std::log1p(w.delta(i));
    quad += proj(i) * proj(i) / a;
  }
  const double value = 0.5 * q * quad - logdet_term / (2.0 * (q - 1.0));
  return {q, std::max(0.0, value), "gaussian_closed_form"};
}

inline double kl_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
  const auto w = detail::whiten(g1, g2);
  double acc = w.dm.squaredNorm();
  for (Eigen::Index i = 0; i < w.delta.size(); ++i) acc += w.delta(i) - std::log1p(w.delta(i));
  return std::max(0.0, 0.5 * acc);
}

/// chi^2 via the q = 2 bridge: exp(R_2) − 1.
inline double chi2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
  return std::expm1(renyi_gaussian(2.0, g1, g2).value);
}

/// Bures–Wasserstein distance squared.
inline double w2_gaussian_sq(const GaussianLaw& g1, const GaussianLaw& g2) {
  detail::require(g1.dim() == g2.dim(), "Gaussian laws must have equal dimension");
  validate(g1);
  validate(g2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(g2.cov);
  const Eigen::MatrixXd r2 = es2.operatorSqrt();
  Eigen::MatrixXd inner = r2 * g1.cov * r2;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esi(inner);
  const double cross = esi.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (g1.mean - g2.mean).squaredNorm() + g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

inline double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) { return std::sqrt(w2_gaussian_sq(g1, g2)); }

// ---- deterministic inequalities ----------------------------------------------

/// mu(E) <= nu(E) + sqrt(chi^2(mu‖nu) nu(E)) for the event selected by `mask`.
inline InequalityCheck check_change_of_measure(const GridDensity& mu, const GridDensity& nu, const std::vector<bool>& mask,
                                               double slack = 1e-12) {
  require_same_grid(mu, nu);
  detail::require(mask.size() == mu.size(), "event mask must have one entry per cell");
  double mu_e = 0.0, nu_e = 0.0;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) {
      mu_e += mu.values[k];
      nu_e += nu.values[k];
    }
  const double rhs = nu_e + std::sqrt(chi2_grid(mu, nu) * nu_e);
  return check_le("mu(E) <= nu(E) + sqrt(chi2(mu||nu) nu(E))", mu_e, rhs, slack);
}

struct WeakTriangleReport {
  double q = 2.0;
  double lhs = 0.0;          // R_q(mu‖pi)
  double r2q = 0.0;          // R_2q(mu‖nu)
  double r2q1 = 0.0;         // R_(2q-1)(nu‖pi)
  double rhs = 0.0;          // (2q−1)/(2q−2) R_2q(mu‖nu) + R_(2q−1)(nu‖pi)
  double rhs_plain = 0.0;    // R_2q(mu‖nu) + R_(2q−1)(nu‖pi)
  bool holds = false;        // lhs <= rhs
  bool plain_holds = false;  // lhs <= rhs_plain (not a theorem; reported only)
  explicit operator bool() const { return holds; }
};

/// Weak triangle inequality from Hölder's inequality with exponents (2, 2):
/// R_q(mu‖pi) <= (2q−1)/(2q−2) R_2q(mu‖nu) + R_(2q−1)(nu‖pi).
/// The coefficient-free form is also evaluated; it can fail.
inline WeakTriangleReport check_weak_triangle(double q, const GridDensity& mu, const GridDensity& nu, const GridDensity& pi,
                                              double slack = 1e-9) {
  detail::require(q >= 2.0, "weak triangle check requires q >= 2");
  require_same_grid(mu, nu);
  require_same_grid(nu, pi);
  WeakTriangleReport r;
  r.q = q;
  r.lhs = renyi_grid(q, mu, pi).value;
  r.r2q = renyi_grid(2.0 * q, mu, nu).value;
  r.r2q1 = renyi_grid(2.0 * q - 1.0, nu, pi).value;
  r.rhs = (2.0 * q - 1.0) / (2.0 * q - 2.0) * r.r2q + r.r2q1;
  r.rhs_plain = r.r2q + r.r2q1;
  r.holds = r.lhs <= r.rhs + slack || std::isinf(r.rhs);
  r.plain_holds = r.lhs <= r.rhs_plain + slack || std::isinf(r.rhs_plain);
  return r;
}

/// R_q nondecreasing along an increasing list of orders.
inline InequalityCheck check_order_monotonicity(const GridDensity& mu, const GridDensity& pi, const std::vector<double>& qs,
                                                double slack = 1e-9) {
  double worst = -std::numeric_limits<double>::infinity();
  double prev = 0.0;
  double worst_lhs = 0.0, worst_rhs = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double v = renyi_grid(qs[i], mu, pi).value;
    if (i > 0 && prev - v > worst) {
      worst = prev - v;
      worst_lhs = prev;
      worst_rhs = v;
    }
    prev = v;
  }
  return check_le("R_q <= R_q' for q <= q'", worst_lhs, worst_rhs, slack);
}

/// Comparison suite against R_2: 2 TV^2, KL and ln(1 + W2^2 / (2 C_PI)).
struct ComparisonReport {
  double r2 = 0.0;
  double two_tv_sq = std::numeric_limits<double>::quiet_NaN();
  double kl = std::numeric_limits<double>::quiet_NaN();
  double w2_term = std::numeric_limits<double>::quiet_NaN();
  bool holds = false;
};

inline ComparisonReport compare_to_r2(const GridDensity& mu, const GridDensity& pi, double slack = 1e-9) {
  ComparisonReport c;
  c.r2 = renyi_grid(2.0, mu, pi).value;
  const double tv = tv_grid(mu, pi);
  c.two_tv_sq = 2.0 * tv * tv;
  c.kl = kl_grid(mu, pi);
  c.holds = c.two_tv_sq <= c.r2 + slack && c.kl <= c.r2 + slack;
  return c;
}

/// Gaussian version; c_pi is the Poincaré constant of g2 (its largest covariance eigenvalue).
inline ComparisonReport compare_to_r2(const GaussianLaw& g1, const GaussianLaw& g2, double slack = 1e-9) {
  ComparisonReport c;
  c.r2 = renyi_gaussian(2.0, g1, g2).value;
  c.kl = kl_gaussian(g1, g2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g2.cov, Eigen::EigenvaluesOnly);
  const double c_pi = es.eigenvalues().maxCoeff();
  c.w2_term = std::log1p(w2_gaussian_sq(g1, g2) / (2.0 * c_pi));
  c.holds = c.kl <= c.r2 + slack && c.w2_term <= c.r2 + slack;
  return c;
}

}  // namespace langevin_lab
