#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "errors.hpp"

namespace langevin_lab {

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }

  static GaussianLaw isotropic(int d, double variance, double shift = 0.0) {
    return {Eigen::VectorXd::Constant(d, shift), variance * Eigen::MatrixXd::Identity(d, d)};
  }
  static GaussianLaw scalar(double m, double variance) {
    return {Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, variance)};
  }
};

inline void validate(const GaussianLaw& g) {
  detail::require(g.mean.size() >= 1, "Gaussian law needs dimension >= 1");
  detail::require(g.cov.rows() == g.mean.size() && g.cov.cols() == g.mean.size(), "covariance shape mismatch");
  detail::require(g.mean.allFinite() && g.cov.allFinite(), "Gaussian law has non-finite entries");
  detail::require((g.cov - g.cov.transpose()).norm() <= 1e-10 * std::max(1.0, g.cov.norm()), "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov, Eigen::EigenvaluesOnly);
  detail::require(es.eigenvalues().minCoeff() > 0.0, "covariance must be positive definite");
}

/// Log density of a Gaussian law at x.
inline double log_density(const GaussianLaw& g, const Eigen::VectorXd& x) {
  Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
  const Eigen::VectorXd z = llt.matrixL().solve(x - g.mean);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < g.cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(g.dim()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace langevin_lab
