#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "divergence.hpp"
#include "errors.hpp"
#include "gaussian_law.hpp"

namespace langevin_lab {

/// V(x) = ½ xᵀAx, so π = N(0, A⁻¹).
struct QuadraticTarget {
  Eigen::MatrixXd A;

  static QuadraticTarget identity(int d) { return {Eigen::MatrixXd::Identity(d, d)}; }

  int dim() const { return static_cast<int>(A.rows()); }
  double lambda_max() const { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff(); }
  double lambda_min() const { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().minCoeff(); }
  /// Bakry–Émery: C_LSI = 1/λ_min(A).
  double c_lsi() const { return 1.0 / lambda_min(); }
  GaussianLaw target_law() const { return {Eigen::VectorXd::Zero(dim()), A.inverse()}; }
};

inline void validate(const QuadraticTarget& t) {
  detail::require(t.A.rows() >= 1 && t.A.rows() == t.A.cols(), "precision must be square");
  detail::require((t.A - t.A.transpose()).norm() <= 1e-12 * std::max(1.0, t.A.norm()), "precision must be symmetric");
  detail::require(t.lambda_min() > 0.0, "precision must be positive definite");
}

namespace detail {

inline void require_contraction(const QuadraticTarget& t, double h) {
  validate(t);
  require(h > 0.0, "step size must be positive");
  const double lmax = t.lambda_max();
  if (!(h < 2.0 / lmax))
    throw precondition_error("step size h = " + std::to_string(h) + " is not contractive (needs h < 2/lambda_max = " +
                             std::to_string(2.0 / lmax) + ")");
}

/// k steps of the affine covariance map S -> M S Mᵀ + Q as the pair (M^k, Σ_{j<k} M^j Q M^jᵀ),
/// composed by binary powering.
struct AffineCov {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
};

inline AffineCov compose(const AffineCov& first, const AffineCov& second) {
  AffineCov out;
  out.P = second.P * first.P;
  out.Q = second.P * first.Q * second.P.transpose() + second.Q;
  out.Q = 0.5 * (out.Q + out.Q.transpose());
  return out;
}

inline AffineCov power(const AffineCov& one, std::uint64_t k) {
  const Eigen::Index d = one.P.rows();
  AffineCov acc{Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Zero(d, d)};
  AffineCov base = one;
  while (k) {
    if (k & 1u) acc = compose(acc, base);
    base = compose(base, base);
    k >>= 1u;
  }
  return acc;
}

}  // namespace detail

/// Exact law of the k-th LMC iterate: m ← (I − hA)m, S ← (I − hA)S(I − hA)ᵀ + 2hI.
inline GaussianLaw lmc_law(const QuadraticTarget& target, const GaussianLaw& init, double h, std::uint64_t k) {
  detail::require_contraction(target, h);
  validate(init);
  detail::require(init.dim() == target.dim(), "init dimension must match the target");
  if (k == 0) return init;
  const Eigen::Index d = target.dim();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) - h * target.A;
  const auto step = detail::power({M, 2.0 * h * Eigen::MatrixXd::Identity(d, d)}, k);
  GaussianLaw out;
  out.mean = step.P * init.mean;
  out.cov = step.P * init.cov * step.P.transpose() + step.Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

/// Residual ‖S − (I − hA)S(I − hA)ᵀ − 2hI‖_max of a candidate stationary covariance.
inline double stationary_residual(const QuadraticTarget& target, double h, const Eigen::MatrixXd& S) {
  const Eigen::Index d = target.dim();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) - h * target.A;
  return (S - M * S * M.transpose() - 2.0 * h * Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
}

/// Stationary law N(0, S∞) of LMC. S∞ is the limit of the fixed-point iteration
/// S ← MSMᵀ + 2hI, accelerated by repeated squaring of the iteration map
/// (S_2n = S_n + M^n S_n M^nᵀ), stopped once the residual is ≤ 1e-12.
inline GaussianLaw stationary_law(const QuadraticTarget& target, double h) {
  detail::require_contraction(target, h);
  const Eigen::Index d = target.dim();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(d, d) - h * target.A;
  Eigen::MatrixXd S = 2.0 * h * Eigen::MatrixXd::Identity(d, d);
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd next = S + P * S * P.transpose();
    next = 0.5 * (next + next.transpose());
    P = P * P;
    const bool settled = (next - S).cwiseAbs().maxCoeff() == 0.0 || P.cwiseAbs().maxCoeff() < 1e-17;
    S = std::move(next);
    if (settled) break;
  }
  const double res = stationary_residual(target, h, S);
  if (res > 1e-12) throw convergence_error("stationary covariance residual " + std::to_string(res) + " exceeds 1e-12");
  return {Eigen::VectorXd::Zero(d), S};
}

/// Exact Rényi bias R_q(N(0, S∞) ‖ N(0, A⁻¹)).
inline double renyi_bias(const QuadraticTarget& target, double h, double q) {
  const auto st = stationary_law(target, h);
  return renyi_gaussian(q, st, target.target_law()).value;
}

/// The explicit bound 86 d h q² C_LSI L² with C_LSI = 1/λ_min and L = λ_max.
inline double renyi_bias_bound(const QuadraticTarget& target, double h, double q) {
  const double L = target.lambda_max();
  return 86.0 * target.dim() * h * q * q * target.c_lsi() * L * L;
}

/// Ornstein–Uhlenbeck law at time t for V = ½xᵀAx started from init.
inline GaussianLaw ou_law(const QuadraticTarget& target, const GaussianLaw& init, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(target.A);
  const Eigen::MatrixXd& U = es.eigenvectors();
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::VectorXd decay = (-t * lam).array().exp();
  const Eigen::MatrixXd E = U * decay.asDiagonal() * U.transpose();
  const Eigen::VectorXd stat = lam.cwiseInverse();
  const Eigen::VectorXd added = stat.array() * (1.0 - (-2.0 * t * lam).array().exp());
  GaussianLaw out;
  out.mean = E * init.mean;
  out.cov = E * init.cov * E.transpose() + U * added.asDiagonal() * U.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace langevin_lab
