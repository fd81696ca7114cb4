#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "langevin_lab/density_lab.hpp"
#include "langevin_lab/gaussian_oracle.hpp"

using namespace langevin_lab;

namespace {

PotentialSpec flat_1d() {
  PotentialSpec s;
  s.d = 1;
  s.id = "flat";
  s.V = [](std::span<const double>) { return 0.0; };
  s.gradV = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
  return s;
}

PropagationConfig config(const PotentialSpec& spec, double h, std::size_t n, Backend b = Backend::automatic) {
  PropagationConfig c;
  c.potential = spec;
  c.h = h;
  c.n_steps = n;
  c.backend = b;
  return c;
}

double max_abs_diff(const GridDensity& a, const GridDensity& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST(TargetGrid, QuadraticMatchesGaussianDensity) {
  const auto g = target_density_grid(make_builtin(Family::quadratic, 1), -10.0, 10.0, 2048);
  double worst = 0.0;
  g.for_each_cell([&](std::size_t k, double x, double) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    worst = std::max(worst, std::abs(g.values[k] / g.dx() - pdf));
  });
  EXPECT_LE(worst, 1e-6);
  EXPECT_NEAR(g.variance(), 1.0, 1e-9);
}

TEST(TargetGrid, PowerTargetIsSymmetric) {
  FamilyParams p;
  p.alpha = 1.5;
  const auto g = target_density_grid(make_builtin(Family::power, 1, p), -40.0, 40.0, 4000);
  EXPECT_NEAR(g.mean(), 0.0, 1e-13);
  for (std::size_t i = 0; i < g.size() / 2; ++i) EXPECT_NEAR(g.values[i], g.values[g.size() - 1 - i], 1e-15);
}

TEST(TargetGrid, ModifiedWithLargeRadiusIsBase) {
  const auto base = make_builtin(Family::smoothed_norm, 1);
  const auto layout = GridDensity::zeros_1d(-30, 30, 3000);
  const auto a = target_density_grid(base, layout);
  const auto b = target_density_grid(make_modified(base, 1.0, 100.0).as_spec(), layout);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
}

TEST(TargetGrid, WindowTooSmall) {
  EXPECT_THROW(target_density_grid(make_builtin(Family::quadratic, 1), -2.0, 2.0, 200), grid_error);
}

TEST(Quadrature, OneStepVarianceOnQuadratic) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 2048);
  const auto mu0 = gaussian_grid(GaussianLaw::scalar(0.0, 1.0), layout);
  const double h = 0.01;
  const auto seq = propagate_lmc_density(mu0, config(spec, h, 1));
  EXPECT_EQ(seq.stats.backend, Backend::quadrature);
  EXPECT_NEAR(seq.snapshots.back().variance(), (1 - h) * (1 - h) + 2 * h, 1e-9);
}

TEST(Quadrature, MatchesGaussianOracleEveryStep) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 2048);
  const auto init = GaussianLaw::scalar(2.0, 0.5);
  const double h = 0.02;
  auto cfg = config(spec, h, 100);
  const auto seq = propagate_lmc_density(gaussian_grid(init, layout), cfg);
  const auto t = QuadraticTarget::identity(1);
  for (std::size_t k = 0; k < seq.snapshots.size(); ++k) {
    const auto law = lmc_law(t, init, h, k);
    EXPECT_NEAR(seq.snapshots[k].mean(), law.mean(0), 1e-6) << k;
    EXPECT_NEAR(seq.snapshots[k].variance(), law.cov(0, 0), 1e-6) << k;
  }
  EXPECT_LE(seq.stats.max_renorm_drift, 1e-6);
  EXPECT_LT(seq.stats.max_boundary_mass, 1e-8);
}

TEST(Quadrature, FlatPotentialIsGaussianSmoothing) {
  const auto layout = GridDensity::zeros_1d(-10, 10, 4000);
  const auto mu0 = gaussian_grid(GaussianLaw::scalar(0.5, 0.3), layout);
  const double h = 0.005;
  const auto seq = propagate_lmc_density(mu0, config(flat_1d(), h, 1));
  const auto expect = gaussian_grid(GaussianLaw::scalar(0.5, 0.3 + 2 * h), layout);
  EXPECT_LE(max_abs_diff(seq.snapshots.back(), expect), 1e-10);
}

TEST(Quadrature, StationaryStartPlateausAtBias) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 2400);
  const auto pi = target_density_grid(spec, layout);
  const double h = 0.05;
  auto cfg = config(spec, h, 400);
  cfg.record_stride = 50;
  const auto c = lmc_decay_curve(2.0, pi, cfg, pi);
  EXPECT_NEAR(c.values.front(), 0.0, 1e-14);
  const double bias = renyi_bias(QuadraticTarget::identity(1), h, 2.0);
  EXPECT_GT(c.values.back(), 0.0);
  EXPECT_NEAR(c.values.back(), bias, 1e-3 * bias);
}

TEST(Quadrature, TwoDimensionalCovariance) {
  Eigen::Matrix2d A{{1.0, 0.3}, {0.3, 0.6}};
  FamilyParams p;
  p.A = A;
  const auto spec = make_builtin(Family::quadratic, 2, p);
  const auto layout = GridDensity::zeros_2d({-9, -9}, {9, 9}, {256, 256});
  GaussianLaw init;
  init.mean = Eigen::Vector2d(0.5, -0.5);
  init.cov = Eigen::Matrix2d{{0.8, 0.1}, {0.1, 1.2}};
  const double h = 0.1;
  const auto seq = propagate_lmc_density(gaussian_grid(init, layout), config(spec, h, 3));
  const auto law = lmc_law(QuadraticTarget{A}, init, h, 3);
  const auto& g = seq.snapshots.back();
  EXPECT_NEAR(g.mean(0), law.mean(0), 1e-6);
  EXPECT_NEAR(g.mean(1), law.mean(1), 1e-6);
  EXPECT_NEAR(g.variance(0), law.cov(0, 0), 1e-6);
  EXPECT_NEAR(g.variance(1), law.cov(1, 1), 1e-6);
}

TEST(Quadrature, UnderResolvedKernelRejected) {
  const auto layout = GridDensity::zeros_1d(-10, 10, 200);  // dx = 0.1, sigma = 0.014
  const auto mu0 = gaussian_grid(GaussianLaw::scalar(0, 1), layout);
  EXPECT_THROW(propagate_lmc_density(mu0, config(make_builtin(Family::quadratic, 1), 1e-4, 1, Backend::quadrature)), grid_error);
  // Automatic selection falls back to the spectral backend instead.
  EXPECT_EQ(propagate_lmc_density(mu0, config(make_builtin(Family::quadratic, 1), 1e-4, 1)).stats.backend, Backend::spectral);
}

TEST(Quadrature, BoundaryLeakageDetected) {
  const auto layout = GridDensity::zeros_1d(-5, 5, 1000);
  const auto mu0 = gaussian_grid(GaussianLaw::scalar(3.0, 0.3), layout);
  EXPECT_THROW(propagate_lmc_density(mu0, config(flat_1d(), 0.1, 20)), grid_error);
}

TEST(Spectral, AgreesWithQuadratureOnNonlinearDrift) {
  const auto spec = make_builtin(Family::smoothed_norm, 1);
  const auto layout = GridDensity::zeros_1d(-25, 25, 4000);
  const auto mu0 = gaussian_grid(GaussianLaw::scalar(4.0, 1.0), layout);
  const double h = 0.02;
  const auto q = propagate_lmc_density(mu0, config(spec, h, 50, Backend::quadrature));
  const auto s = propagate_lmc_density(mu0, config(spec, h, 50, Backend::spectral));
  EXPECT_EQ(s.stats.backend, Backend::spectral);
  EXPECT_NEAR(q.snapshots.back().mean(), s.snapshots.back().mean(), 1e-5);
  EXPECT_NEAR(q.snapshots.back().variance(), s.snapshots.back().variance(), 1e-5);
  const auto pi = target_density_grid(spec, layout);
  const double rq = renyi_grid(2.0, q.snapshots.back(), pi).value, rs = renyi_grid(2.0, s.snapshots.back(), pi).value;
  EXPECT_NEAR(rq, rs, 1e-4 * rq);
}

TEST(Spectral, QuadraticMomentsOnCoarseGrid) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 1024);  // dx = 0.023, sigma = 0.0045
  const auto init = GaussianLaw::scalar(3.0, 1.0);
  const double h = 1e-5;
  const auto seq = propagate_lmc_density(gaussian_grid(init, layout), config(spec, h, 2000));
  EXPECT_EQ(seq.stats.backend, Backend::spectral);
  const auto law = lmc_law(QuadraticTarget::identity(1), init, h, 2000);
  // The CDF remap costs O(dx^2) per step, so this is looser than the quadrature check.
  EXPECT_NEAR(seq.snapshots.back().mean(), law.mean(0), 5e-5);
  EXPECT_NEAR(seq.snapshots.back().variance(), law.cov(0, 0), 1e-4);
}

TEST(Diffusion, QuadraticMatchesOrnsteinUhlenbeck) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 2048);
  const auto init = GaussianLaw::scalar(2.0, 0.25);
  const auto pi = target_density_grid(spec, layout);
  auto cfg = config(spec, 5e-3, 200);  // T = 1
  cfg.record_stride = 20;
  DiffusionOptions opt;
  opt.h_fine = 1e-4;
  opt.check_refinement = true;
  const auto res = propagate_diffusion_density(2.0, gaussian_grid(init, layout), cfg, pi, opt);
  ASSERT_TRUE(res.refinement.has_value());
  EXPECT_TRUE(res.refinement->passes);
  const auto t = QuadraticTarget::identity(1);
  for (std::size_t i = 0; i < res.curve.size(); ++i) {
    const auto ou = ou_law(t, init, res.curve.times[i]);
    const double exact = renyi_gaussian(2.0, ou, t.target_law()).value;
    EXPECT_NEAR(res.curve.values[i], exact, 1e-3 * std::max(1.0, exact)) << res.curve.times[i];
    if (i > 0) {
      EXPECT_LE(res.curve.values[i], res.curve.values[i - 1] + 1e-9);
    }
  }
}

TEST(Diffusion, StationaryStartStaysFlat) {
  const auto spec = make_builtin(Family::smoothed_norm, 1);
  const auto layout = GridDensity::zeros_1d(-40, 40, 2048);
  const auto pi = target_density_grid(spec, layout);
  auto cfg = config(spec, 5e-3, 100);
  cfg.record_stride = 20;
  DiffusionOptions opt;
  const auto res = propagate_diffusion_density(2.0, pi, cfg, pi, opt);
  for (double v : res.curve.values) EXPECT_LE(v, 1e-3);
}

TEST(Diffusion, RequiresFineStep) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 1024);
  const auto pi = target_density_grid(spec, layout);
  DiffusionOptions opt;
  opt.h_fine = 1e-3;
  EXPECT_THROW(propagate_diffusion_density(2.0, pi, config(spec, 0.01, 10), pi, opt), precondition_error);
}

TEST(DecayCurve, CsvHasMetadataHeader) {
  const auto spec = make_builtin(Family::quadratic, 1);
  const auto layout = GridDensity::zeros_1d(-12, 12, 1024);
  const auto pi = target_density_grid(spec, layout);
  const auto c = lmc_decay_curve(2.0, gaussian_grid(GaussianLaw::scalar(1, 1), layout), config(spec, 0.05, 4), pi);
  std::ostringstream os;
  write_csv(os, c);
  const auto s = os.str();
  EXPECT_EQ(s.rfind("# q=2\n", 0), 0u);
  EXPECT_NE(s.find("# potential=quadratic"), std::string::npos);
  EXPECT_NE(s.find("# grid=-12:12:1024\n"), std::string::npos);
  EXPECT_NE(s.find("# h=0.05\n"), std::string::npos);
  EXPECT_NE(s.find("t,R_q\n"), std::string::npos);
  EXPECT_EQ(c.size(), 5u);
}

TEST(DecayCurve, LineFitRecoversExactLine) {
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}
