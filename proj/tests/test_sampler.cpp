#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "langevin_lab/gaussian_oracle.hpp"
#include "langevin_lab/sampler.hpp"

using namespace langevin_lab;

TEST(Init, GaussianMomentsAtZeroSteps) {
  GaussianLaw law;
  law.mean = Eigen::Vector2d(1.0, -2.0);
  law.cov = Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}};
  const auto r = lmc_run(make_builtin(Family::quadratic, 2), law, 0.1, 0, 40000, 7);
  const auto m = r.ensemble.mean();
  const auto c = r.ensemble.covariance();
  const double n = 40000.0;
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(m(j), law.mean(j), 4.0 * std::sqrt(law.cov(j, j) / n));
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(c(j, j), law.cov(j, j), 4.0 * law.cov(j, j) * std::sqrt(2.0 / n));
  EXPECT_NEAR(c(0, 1), 0.5, 4.0 * std::sqrt((2.0 + 0.25) / n));
}

TEST(Lmc, DeterministicAcrossThreadCounts) {
  const auto spec = make_builtin(Family::smoothed_norm, 3);
  const auto init = GaussianLaw::isotropic(3, 2.0, 1.0);
  LmcOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const auto a = lmc_run(spec, init, 0.05, 200, 301, 99, one);
  const auto b = lmc_run(spec, init, 0.05, 200, 301, 99, many);
  EXPECT_EQ(a.ensemble.particles, b.ensemble.particles);
  EXPECT_NE(a.ensemble.particles, lmc_run(spec, init, 0.05, 200, 301, 100, one).ensemble.particles);
}

TEST(Lmc, SplitRunEqualsSingleRun) {
  const auto spec = make_builtin(Family::quadratic, 2);
  const auto init = GaussianLaw::isotropic(2, 1.0);
  auto a = lmc_run(spec, init, 0.1, 30, 50, 3).ensemble;
  auto b = lmc_run(spec, init, 0.1, 10, 50, 3).ensemble;
  lmc_advance(spec, b, 20);
  EXPECT_EQ(b.step_index, 30u);
  EXPECT_EQ(a.particles, b.particles);
}

TEST(Lmc, RecordedAndUnrecordedPathsAgree) {
  const auto spec = make_builtin(Family::quadratic, 2);
  const auto init = GaussianLaw::isotropic(2, 1.0);
  LmcOptions rec;
  rec.record_norms = true;
  rec.norm_stride = 4;
  const auto a = lmc_run(spec, init, 0.1, 10, 64, 5, rec);
  const auto b = lmc_run(spec, init, 0.1, 10, 64, 5);
  EXPECT_EQ(a.ensemble.particles, b.ensemble.particles);
  ASSERT_EQ(a.norms.size(), 4u);  // k = 0, 4, 8, 10
  EXPECT_EQ(a.norms.back().k, 10u);
  for (const auto& s : a.norms) EXPECT_GE(s.max_norm, s.mean_norm);
}

TEST(Lmc, QuadraticMomentsMatchExactLaw) {
  Eigen::Matrix2d A{{1.5, 0.4}, {0.4, 0.8}};
  FamilyParams p;
  p.A = A;
  const auto spec = make_builtin(Family::quadratic, 2, p);
  GaussianLaw init;
  init.mean = Eigen::Vector2d(3.0, -1.0);
  init.cov = Eigen::Matrix2d::Identity() * 0.5;
  const double h = 0.1;
  const std::size_t n = 50000;
  const auto r = lmc_run(spec, init, h, 25, n, 11);
  const auto law = lmc_law(QuadraticTarget{A}, init, h, 25);
  const auto m = r.ensemble.mean();
  const auto c = r.ensemble.covariance();
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(m(j), law.mean(j), 4.0 * std::sqrt(law.cov(j, j) / n));
    EXPECT_NEAR(c(j, j), law.cov(j, j), 4.0 * law.cov(j, j) * std::sqrt(2.0 / n));
  }
}

TEST(Lmc, DivergenceNamesStep) {
  const auto spec = make_builtin(Family::quadratic, 1);
  try {
    lmc_run(spec, GaussianLaw::scalar(1.0, 1.0), 3.0, 5000, 4, 1);
    FAIL() << "expected chain_diverged";
  } catch (const chain_diverged& e) {
    EXPECT_GT(e.step(), 100u);
    EXPECT_LT(e.step(), 5000u);
    EXPECT_NE(std::string(e.what()).find("step " + std::to_string(e.step())), std::string::npos);
  }
}

TEST(Lmc, RejectsBadStepAndDimension) {
  EXPECT_THROW(lmc_run(make_builtin(Family::quadratic, 1), GaussianLaw::scalar(0, 1), 0.0, 1, 4, 1), precondition_error);
  EXPECT_THROW(lmc_run(make_builtin(Family::quadratic, 2), GaussianLaw::scalar(0, 1), 0.1, 1, 4, 1), precondition_error);
}

TEST(Interpolation, EndpointsAndMatchedNoise) {
  const auto spec = make_builtin(Family::smoothed_norm, 2);
  auto e = lmc_run(spec, GaussianLaw::isotropic(2, 3.0, 1.0), 0.05, 7, 100, 21).ensemble;
  EXPECT_EQ(interpolated_position(spec, e, 0.0), e.particles);
  const auto bridged = interpolated_position(spec, e, e.h, BridgeNoise::matched);
  lmc_advance(spec, e, 1);
  EXPECT_EQ(bridged, e.particles);
  EXPECT_THROW(interpolated_position(spec, e, 2.0 * e.h), precondition_error);
}

TEST(Interpolation, OffsetVarianceOnFlatDrift) {
  PotentialSpec flat;
  flat.d = 1;
  flat.V = [](std::span<const double>) { return 0.0; };
  flat.gradV = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
  Ensemble e;
  e.n = 40000;
  e.d = 1;
  e.h = 0.2;
  e.particles.assign(e.n, 1.0);
  const auto x = interpolated_position(flat, e, 0.05, BridgeNoise::fresh, 4);
  double m = 0, v = 0;
  for (double xi : x) m += xi;
  m /= e.n;
  for (double xi : x) v += (xi - m) * (xi - m);
  v /= e.n - 1;
  EXPECT_NEAR(m, 1.0, 4.0 * std::sqrt(0.1 / e.n));
  EXPECT_NEAR(v, 0.1, 4.0 * 0.1 * std::sqrt(2.0 / e.n));
}

TEST(GridSampling, MomentsOfGaussianGrid) {
  const auto g = gaussian_grid(GaussianLaw::scalar(1.0, 0.5), GridDensity::zeros_1d(-8, 10, 3600));
  const auto e = sample_from_grid(g, 40000, 8);
  EXPECT_NEAR(e.mean()(0), 1.0, 4.0 * std::sqrt(0.5 / 40000));
  EXPECT_NEAR(e.covariance()(0, 0), 0.5, 4.0 * 0.5 * std::sqrt(2.0 / 40000));
}

TEST(Tails, InfiniteThresholdNeverExceeded) {
  std::vector<std::vector<double>> norms = {{1, 2, 3}, {5, 1e10}, {}};
  const auto r = check_iterate_tails(norms, 0.1, std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.empirical_exceed_rate, 0.0);
  EXPECT_TRUE(r.passes);
  EXPECT_EQ(r.n_runs, 3u);
  const auto z = check_iterate_tails(norms, 0.1, 0.0);
  EXPECT_NEAR(z.empirical_exceed_rate, 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(z.passes);
}

TEST(Tails, ThresholdMonotoneInConstants) {
  TailBoundInputs in;
  in.T = 5.0;
  in.N = 50;
  in.h = 0.1;
  double prev = 0.0;
  for (double c : {0.0, 1.0, 10.0, 490.0}) {
    in.c_main = c;
    const double t = tail_threshold(in);
    EXPECT_GT(t, prev);
    prev = t;
  }
  in.c_main = 490.0;
  const double base = tail_threshold(in);
  in.delta = 0.01;
  EXPECT_GT(tail_threshold(in), base);
  in.delta = 0.6;
  EXPECT_THROW(tail_threshold(in), precondition_error);
}

TEST(Tails, DiffusionProxyWithinBound) {
  const auto spec = make_builtin(Family::quadratic, 2);
  const auto paths = diffusion_norm_paths(spec, GaussianLaw::isotropic(2, 2.0, 1.0), 0.1, 50, 8, 500, 17);
  ASSERT_EQ(paths.size(), 500u);
  TailBoundInputs in;
  in.m = 2.0 * std::sqrt(2.0);
  in.T = 5.0;
  in.N = 50;
  in.h = 0.1;
  in.d = 2;
  in.R2_hat = 4.0;
  const auto r = check_iterate_tails(paths, in);
  EXPECT_TRUE(r.passes);
}

TEST(BrownianMgf, ZeroLambdaIsExactlyOne) {
  const auto r = check_brownian_mgf_detailed(1, 0.1, 0.0, 100, 64, 3);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.rhs, 1.0);
  EXPECT_TRUE(r.holds);
}

TEST(BrownianMgf, HoldsInTwoDimensions) {
  const auto r = check_brownian_mgf_detailed(2, 0.01, 10.0, 20000, 256, 5);
  EXPECT_TRUE(r.holds) << r.mean << " vs " << r.rhs;
  // E sup |B|^2 >= E |B_h|^2 = d h, so the mean exceeds exp(λ d h) by Jensen.
  EXPECT_GT(r.mean, std::exp(10.0 * 2 * 0.01) * 0.99);
  EXPECT_THROW(check_brownian_mgf(1, 0.1, 3.0, 10, 64, 1), precondition_error);
  EXPECT_THROW(brownian_sup_sq(1, 0.1, 10, 32, 1), precondition_error);
}

TEST(BrownianMgf, FractionalHolds) {
  const auto r = check_brownian_mgf_fractional(2, 0.01, 0.5, 2.0, 5000, 128, 6);
  EXPECT_TRUE(r.holds);
  EXPECT_THROW(check_brownian_mgf_fractional(1, 0.1, 1.0, 0.1, 10, 64, 1), precondition_error);
}

TEST(DisplacementMgf, HoldsAndChecksPreconditions) {
  const auto spec = make_builtin(Family::smoothed_norm, 2);
  const std::vector<double> z0 = {3.0, -4.0};
  const double s = spec.smoothness.s, L = spec.smoothness.L;
  const double h = 1.0 / (6.0 * L);
  const double lam = 1.0 / (96.0 * std::pow(2.0, s) * std::pow(h, s));
  const auto r = check_displacement_mgf_detailed(spec, z0, h, lam, s, 4000, 12);
  EXPECT_TRUE(r.holds);
  EXPECT_THROW(check_displacement_mgf(spec, z0, 2.0 * h, lam, s, 10, 1), precondition_error);
  EXPECT_THROW(check_displacement_mgf(spec, z0, h, 2.0 * lam, s, 10, 1), precondition_error);
  EXPECT_THROW(check_displacement_mgf(spec, z0, h, lam, 0.5 * s, 10, 1), precondition_error);
}

TEST(Csv, EnsembleAndNorms) {
  Ensemble e;
  e.n = 2;
  e.d = 2;
  e.particles = {1.0, 2.0, -0.5, 0.25};
  std::ostringstream os;
  write_csv(os, e);
  EXPECT_EQ(os.str(), "particle,x0,x1\n0,1,2\n1,-0.5,0.25\n");
  std::ostringstream ns;
  write_csv(ns, std::vector<NormStat>{{0, 2.0, 1.5}});
  EXPECT_EQ(ns.str(), "k,max_norm,mean_norm\n0,2,1.5\n");
}
