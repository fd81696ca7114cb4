#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "langevin_lab/potentials.hpp"

using namespace langevin_lab;

namespace {

std::vector<PotentialSpec> all_builtins(int d) {
  std::vector<PotentialSpec> out;
  for (double a : {1.2, 1.5, 2.0}) {
    FamilyParams p;
    p.alpha = a;
    out.push_back(make_builtin(Family::power, d, p));
    out.push_back(make_builtin(Family::smoothed_power, d, p));
    out.push_back(make_builtin(Family::product, d, p));
    out.push_back(make_builtin(Family::perturbed_power, d, p));
  }
  out.push_back(make_builtin(Family::smoothed_norm, d));
  out.push_back(make_builtin(Family::quadratic, d));
  for (double s : {0.25, 0.5, 1.0}) {
    FamilyParams p;
    p.s = s;
    out.push_back(make_builtin(Family::perturbed_quadratic, d, p));
  }
  return out;
}

// m = ∫ r^d e^{-f} dr / ∫ r^{d-1} e^{-f} dr by exp-sinh quadrature.
double radial_mean_norm(const std::function<double(double)>& f, int d) {
  boost::math::quadrature::exp_sinh<double> q;
  const double f0 = f(0.0);
  auto weight = [&](double r, int k) {
    const double e = f(r) - f0;
    return e > 700.0 ? 0.0 : std::pow(r, k) * std::exp(-e);
  };
  const double num = q.integrate([&](double r) { return weight(r, d); });
  const double den = q.integrate([&](double r) { return weight(r, d - 1); });
  return num / den;
}

}  // namespace

TEST(Builtins, GradientVanishesAtOrigin) {
  for (int d : {1, 2, 3}) {
    for (const auto& spec : all_builtins(d)) {
      std::vector<double> x(d, 0.0);
      for (double g : spec.gradient(x)) EXPECT_EQ(g, 0.0) << spec.id;
    }
  }
}

TEST(Builtins, GradientMatchesFiniteDifferences) {
  for (int d : {1, 3}) {
    for (const auto& spec : all_builtins(d)) EXPECT_LE(gradient_fd_error(spec, 100, 5), 1e-5) << spec.id << " d=" << d;
  }
}

TEST(Builtins, SmoothedNormHandGradient) {
  const auto spec = make_builtin(Family::smoothed_norm, 3);
  const std::vector<double> x{1.0, 0.0, 0.0};
  const auto g = spec.gradient(x);
  EXPECT_NEAR(g[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_NEAR(spec.value(x), std::sqrt(2.0), 1e-15);
}

TEST(Builtins, PowerTwoIsQuadratic) {
  FamilyParams p;
  p.alpha = 2.0;
  const auto spec = make_builtin(Family::power, 1, p);
  EXPECT_NEAR(spec.value1(3.0), 9.0, 1e-12);
  EXPECT_NEAR(spec.grad1(3.0), 6.0, 1e-12);
}

TEST(Builtins, SmoothnessMetadata) {
  FamilyParams p;
  p.alpha = 1.5;
  EXPECT_DOUBLE_EQ(make_builtin(Family::power, 2, p).smoothness.s, 0.5);
  EXPECT_DOUBLE_EQ(make_builtin(Family::smoothed_power, 2, p).smoothness.s, 1.0);
  EXPECT_DOUBLE_EQ(make_builtin(Family::smoothed_norm, 2).smoothness.s, 1.0);
}

TEST(Builtins, RejectsOutOfRangeParameters) {
  FamilyParams p;
  p.alpha = 2.5;
  EXPECT_THROW(make_builtin(Family::power, 1, p), precondition_error);
  p.alpha = 1.0;
  EXPECT_THROW(make_builtin(Family::power, 1, p), precondition_error);
  FamilyParams q;
  q.s = 0.0;
  EXPECT_THROW(make_builtin(Family::perturbed_quadratic, 1, q), precondition_error);
  EXPECT_THROW(make_builtin("no_such_family", 1), precondition_error);
  EXPECT_THROW(make_builtin(Family::quadratic, 0), precondition_error);
}

TEST(Builtins, PerturbationsAreBoundedByOne) {
  FamilyParams p;
  p.alpha = 1.5;
  const auto base = make_builtin(Family::power, 2, p);
  const auto pert = make_builtin(Family::perturbed_power, 2, p);
  const auto quad = make_builtin(Family::quadratic, 2);
  const auto pq = make_builtin(Family::perturbed_quadratic, 2);
  for (int i = 0; i < 2000; ++i) {
    const double r = 0.01 * i;
    const std::vector<double> x{r * 0.6, -r * 0.8};
    EXPECT_LE(std::abs(pert.value(x) - base.value(x)), 1.0 + 1e-12);
    EXPECT_LE(std::abs(pq.value(x) - quad.value(x)), 1.0 + 1e-12);
  }
}

TEST(Builtins, DeclaredMinimumIsAttained) {
  for (const auto& spec : all_builtins(1)) {
    ASSERT_TRUE(spec.min_V.has_value()) << spec.id;
    double lowest = spec.value1(0.0);
    for (int i = -4000; i <= 4000; ++i) lowest = std::min(lowest, spec.value1(0.002 * i));
    EXPECT_LE(*spec.min_V, lowest + 1e-9) << spec.id;
    EXPECT_GE(*spec.min_V, lowest - 1e-6) << spec.id;
    EXPECT_DOUBLE_EQ(spec.V_at_0, spec.value1(0.0)) << spec.id;
  }
}

TEST(MeanNorm, GaussianClosedForms) {
  const auto q = make_builtin(Family::quadratic, 1);
  EXPECT_NEAR(estimate_mean_norm(q), std::sqrt(2.0 / std::numbers::pi), 1e-4 * std::sqrt(2.0 / std::numbers::pi));
  FamilyParams p;
  p.alpha = 2.0;
  const auto pw = make_builtin(Family::power, 1, p);
  EXPECT_NEAR(estimate_mean_norm(pw), 1.0 / std::sqrt(std::numbers::pi), 1e-4);
  // d = 3 standard Gaussian: E‖x‖ = 2√(2/π).
  EXPECT_NEAR(estimate_mean_norm(make_builtin(Family::quadratic, 3)), 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-6);
}

TEST(MeanNorm, RadialFamiliesMatchIndependentQuadrature) {
  for (int d : {1, 2, 4}) {
    for (const auto& spec : all_builtins(d)) {
      if (!spec.radial) continue;
      const double ref = radial_mean_norm(spec.radial, d);
      EXPECT_NEAR(estimate_mean_norm(spec), ref, 1e-4 * ref) << spec.id << " d=" << d;
      ASSERT_TRUE(spec.mean_norm.has_value());
      EXPECT_NEAR(*spec.mean_norm, ref, 1e-4 * ref);
    }
  }
}

TEST(MeanNorm, GridPathForNonRadialTwoDimensions) {
  FamilyParams p;
  p.alpha = 2.0;
  p.A = Eigen::MatrixXd::Identity(2, 2);
  p.A(0, 0) = 4.0;  // anisotropic: no radial profile
  const auto spec = make_builtin(Family::quadratic, 2, p);
  const auto est = estimate_mean_norm_detailed(spec);
  EXPECT_EQ(est.method, "grid_quadrature");
  // E sqrt(x²/4 + y²) for standard normals, by 2D quadrature with Boost in polar form.
  boost::math::quadrature::exp_sinh<double> q;
  double ref = 0.0;
  const int nt = 2000;
  for (int k = 0; k < nt; ++k) {
    const double t = 2.0 * std::numbers::pi * (k + 0.5) / nt;
    const double a = 0.25 * std::cos(t) * std::cos(t) + std::sin(t) * std::sin(t);
    ref += q.integrate([&](double r) { return r * r * std::sqrt(a) * std::exp(-0.5 * r * r); }) / nt;
  }
  EXPECT_NEAR(est.value, ref, 1e-4 * ref);
}

TEST(MeanNorm, MonteCarloForProductTargets) {
  FamilyParams p;
  p.alpha = 2.0;
  const auto spec = make_builtin(Family::product, 3, p);
  MeanNormOptions opt;
  opt.n_samples = 100000;
  const auto est = estimate_mean_norm_detailed(spec, opt);
  EXPECT_EQ(est.method, "monte_carlo");
  // (1 + t²) per coordinate: product of N(0, 1/2), so E‖x‖ = 2√(2/π)/√2.
  const double ref = 2.0 * std::sqrt(2.0 / std::numbers::pi) / std::sqrt(2.0);
  EXPECT_NEAR(est.value, ref, 4.0 * est.std_error);
  EXPECT_GT(est.std_error, 0.0);
}

TEST(MeanNorm, PositiveForAllBuiltins) {
  for (const auto& spec : all_builtins(2)) EXPECT_GT(estimate_mean_norm(spec), 0.0) << spec.id;
}

TEST(Modified, AgreesInsideBallBitForBit) {
  const auto base = make_builtin(Family::smoothed_norm, 2);
  const auto mod = make_modified(base, 0.5, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double r = 5.0 * i / 199.0, t = 0.37 * i;
    const std::vector<double> x{r * std::cos(t), r * std::sin(t)};
    EXPECT_EQ(mod.value(x), base.value(x));
    EXPECT_EQ(mod.gradient(x), base.gradient(x));
  }
}

TEST(Modified, HingeHandValue) {
  PotentialSpec zero;
  zero.d = 1;
  zero.V = [](std::span<const double>) { return 0.0; };
  zero.gradV = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
  zero.mean_norm = 0.1;
  const auto mod = make_modified(zero, 2.0, 1.0);
  const double x = 3.0;
  EXPECT_DOUBLE_EQ(mod.value(std::span<const double>(&x, 1)), 4.0);
  EXPECT_DOUBLE_EQ(mod.gradient(std::span<const double>(&x, 1))[0], 4.0);
}

TEST(Modified, DominatesBaseAndGrowthBound) {
  const auto base = make_builtin(Family::quadratic, 3);
  const double R = std::max(1.0, 2.0 * *base.mean_norm);
  const auto mod = make_modified(base, 1.5, R);
  std::vector<double> x(3);
  for (int k = 0; k < 1000; ++k) {
    rng::NormalBlock(11, rng::Stream::holder_pairs, k, 0).fill(x);
    for (auto& v : x) v *= 1.0 + k % 17;
    EXPECT_GE(mod.value(x), base.value(x));
    EXPECT_LE(norm2(mod.gradient(x)), mod.gradient_growth_bound(x) * (1.0 + 1e-12));
  }
}

TEST(Modified, RadiusFloorEnforced) {
  const auto base = make_builtin(Family::smoothed_norm, 1);
  const double floor = std::max(1.0, 2.0 * *base.mean_norm);
  EXPECT_THROW(make_modified(base, 1.0, 0.99 * floor), precondition_error);
  EXPECT_THROW(make_modified(base, 0.0, 2.0 * floor), precondition_error);
  EXPECT_NO_THROW(make_modified(base, 1.0, floor));
}

TEST(Holder, QuadraticRatioAtMostOne) {
  const auto spec = make_builtin(Family::quadratic, 3);
  const auto rep = verify_holder(spec, 5000, 1);
  EXPECT_LE(rep.max_ratio, 1.0 + 1e-12);
  EXPECT_FALSE(rep.violation);
}

TEST(Holder, DeclaredConstantsHoldForBuiltins) {
  for (int d : {1, 2}) {
    for (const auto& spec : all_builtins(d)) {
      if (spec.family == Family::perturbed_quadratic) continue;  // record is local to a ball
      const auto rep = verify_holder(spec, 20000, 3);
      EXPECT_FALSE(rep.violation) << spec.id << " d=" << d << " ratio " << rep.max_ratio << " L " << rep.declared_L;
    }
  }
  FamilyParams p;
  p.alpha = 1.5;
  const auto rep = verify_holder(make_builtin(Family::power, 2, p), 20000, 4);
  EXPECT_FALSE(rep.violation);
  EXPECT_GT(rep.max_ratio, 0.5 * rep.declared_L);  // sampler gets close to the sharp constant
}

TEST(Holder, UnderDeclaredConstantFlagged) {
  const auto spec = make_builtin(Family::quadratic, 2);
  EXPECT_TRUE(verify_holder(spec, 1000, 2, 0.5).violation);
}

TEST(FIConstants, Validation) {
  EXPECT_THROW(validate(FIConstants::lo(2.5, 1.0)), precondition_error);
  EXPECT_THROW(validate(FIConstants::lsi(0.0)), precondition_error);
  EXPECT_THROW(validate(FIConstants::mlsi(2.5, 0.5, 1.0, 1.0)), precondition_error);
  EXPECT_NO_THROW(validate(FIConstants::lo(1.5, 2.0)));
  const auto q = make_builtin(Family::quadratic, 2);
  ASSERT_TRUE(q.find_fi(FIKind::LSI).has_value());
  EXPECT_DOUBLE_EQ(q.find_fi(FIKind::LSI)->C, 1.0);
  EXPECT_FALSE(make_builtin(Family::smoothed_norm, 1).find_fi(FIKind::LSI).has_value());
}
