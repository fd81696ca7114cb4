#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "decay_curve.hpp"
#include "density_lab.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "gaussian_law.hpp"
#include "gaussian_oracle.hpp"
#include "grid_density.hpp"
#include "planner.hpp"
#include "potentials.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace langevin_lab {

using json = nlohmann::json;

/// Malformed or out-of-range experiment configuration (exit code 2).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Assertion {
  std::string name;
  std::string relation;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

inline Assertion assert_le(std::string name, std::string relation, double lhs, double rhs, double slack = 0.0) {
  const bool ok = lhs <= rhs + slack || (std::isinf(rhs) && rhs > 0);
  return {std::move(name), std::move(relation), lhs, rhs, ok};
}

inline Assertion assert_in(std::string name, double value, double lo, double hi) {
  return {std::move(name), "lo <= value <= hi, lhs=value rhs=[" + std::to_string(lo) + ", " + std::to_string(hi) + "]", value,
          hi, value >= lo && value <= hi};
}

struct RunReport {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  json metrics = json::object();
  std::vector<Assertion> assertions;
  double wall_clock_s = 0.0;

  bool passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.pass; });
  }

  json to_json() const {
    json a = json::array();
    for (const auto& x : assertions) {
      auto num = [](double v) -> json {
        if (std::isfinite(v)) return v;
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
      };
      a.push_back({{"name", x.name}, {"relation", x.relation}, {"lhs", num(x.lhs)}, {"rhs", num(x.rhs)}, {"pass", x.pass}});
    }
    return {{"command", command}, {"seed", seed},     {"config", config},          {"metrics", metrics},
            {"assertions", a},    {"pass", passed()}, {"wall_clock_s", wall_clock_s}};
  }
};

// ---- config parsing ------------------------------------------------------------

namespace cfg {

template <class T>
T get(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error("field '" + key + "': " + e.what());
  }
}

template <class T>
T need(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw config_error("missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error("field '" + key + "': " + e.what());
  }
}

inline const json& section(const json& j, const std::string& key) {
  static const json empty = json::object();
  if (!j.is_object() || !j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw config_error("field '" + key + "' must be an object");
  return j.at(key);
}

inline Eigen::MatrixXd matrix(const json& j, const std::string& key) {
  const auto rows = need<std::vector<std::vector<double>>>(j, key);
  if (rows.empty()) throw config_error("matrix '" + key + "' is empty");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw config_error("matrix '" + key + "' is ragged");
    for (std::size_t k = 0; k < rows[i].size(); ++k) M(i, k) = rows[i][k];
  }
  return M;
}

inline std::vector<double> scalar_or_list(const json& j, const std::string& key, std::vector<double> fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (j.at(key).is_number()) return {j.at(key).get<double>()};
  return need<std::vector<double>>(j, key);
}

/// {"family": "...", "d": 1, "alpha": 2, "s": 0.5, "radius": 4, "A": [[..]]}
inline PotentialSpec potential(const json& j) {
  FamilyParams p;
  p.alpha = get(j, "alpha", p.alpha);
  p.s = get(j, "s", p.s);
  p.radius = get(j, "radius", p.radius);
  if (j.contains("A")) p.A = matrix(j, "A");
  const int d = get(j, "d", p.A.size() ? static_cast<int>(p.A.rows()) : 1);
  return make_builtin(need<std::string>(j, "family"), d, p);
}

/// {"kind": "LSI", "C": 1, "alpha": .., "alpha0": .., "alpha1": .., "C_tail": .., "log_concave": false}
inline FIConstants fi(const json& j) {
  FIConstants f;
  f.kind = fi_kind_from_string(need<std::string>(j, "kind"));
  f.C = need<double>(j, "C");
  f.alpha = get(j, "alpha", f.kind == FIKind::LSI ? 2.0 : 1.0);
  f.alpha0 = get(j, "alpha0", f.alpha0);
  f.alpha1 = get(j, "alpha1", f.alpha1);
  f.C_tail = get(j, "C_tail", f.C_tail);
  f.log_concave = get(j, "log_concave", false);
  return f;
}

inline PlanRequest plan_request(const json& j) {
  PlanRequest r;
  r.eps = need<double>(j, "eps");
  r.q = get(j, "q", r.q);
  r.d = get(j, "d", r.d);
  r.fi = fi(section(j, "fi"));
  const auto& sm = section(j, "smoothness");
  r.smooth.s = get(sm, "s", 1.0);
  r.smooth.L = need<double>(sm, "L");
  r.R0 = get(j, "R0", r.R0);
  r.m = get(j, "m", r.m);
  if (j.contains("R0_hat")) r.R0_hat = need<double>(j, "R0_hat");
  return r;
}

/// {"lo": -10, "hi": 10, "n": 2001} or 2D {"lo": [..], "hi": [..], "n": [..]}
inline GridDensity grid(const json& j, int dims) {
  if (dims == 1) return GridDensity::zeros_1d(need<double>(j, "lo"), need<double>(j, "hi"), need<std::size_t>(j, "n"));
  if (dims == 2) {
    const auto lo = need<std::vector<double>>(j, "lo");
    const auto hi = need<std::vector<double>>(j, "hi");
    const auto n = need<std::vector<std::size_t>>(j, "n");
    if (lo.size() != 2 || hi.size() != 2 || n.size() != 2) throw config_error("2D grid needs two-element lo, hi and n");
    return GridDensity::zeros_2d({lo[0], lo[1]}, {hi[0], hi[1]}, {n[0], n[1]});
  }
  throw config_error("grids are limited to 1 or 2 dimensions");
}

/// {"mean": 0 | [..], "var": 1} or {"mean": [..], "cov": [[..]]}
inline GaussianLaw gaussian(const json& j, int d) {
  GaussianLaw g;
  g.mean = Eigen::VectorXd::Zero(d);
  if (j.contains("mean")) {
    const auto m = scalar_or_list(j, "mean", {});
    if (m.size() == 1)
      g.mean.setConstant(m[0]);
    else if (static_cast<int>(m.size()) == d)
      for (int i = 0; i < d; ++i) g.mean(i) = m[i];
    else
      throw config_error("init mean has the wrong dimension");
  }
  if (j.contains("cov")) {
    g.cov = matrix(j, "cov");
    if (g.cov.rows() != d || g.cov.cols() != d) throw config_error("init covariance has the wrong dimension");
  } else {
    g.cov = get(j, "var", 1.0) * Eigen::MatrixXd::Identity(d, d);
  }
  return g;
}

}  // namespace cfg

inline json to_json(const Plan& p) {
  json pre = json::array();
  for (const auto& c : p.preconditions)
    pre.push_back({{"relation", c.relation}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}});
  return {{"theorem", p.theorem}, {"h", p.h}, {"N", p.N}, {"T", p.T}, {"N0", p.N0}, {"regime_notes", p.regime_notes},
          {"preconditions", pre}};
}

inline void write_text(const std::optional<std::filesystem::path>& dir, const std::string& name, const std::string& body) {
  if (!dir) return;
  std::filesystem::create_directories(*dir);
  std::ofstream os(*dir / name);
  if (!os) throw std::runtime_error("cannot write " + (*dir / name).string());
  os << body;
}

// ---- decay-curve analysis --------------------------------------------------------

struct DecayAnalysis {
  double R0 = 0.0;
  double t_cross = kInf;          // first time R <= 1 (log-linear interpolation)
  double pre_slope = 0.0;         // -ln R0 / t_cross
  LineFit terminal;               // ln R vs t over r_lo <= R <= r_hi
  std::size_t terminal_points = 0;
  double slope_ratio = 0.0;       // |terminal slope| / |pre slope|
  double max_second_difference = 0.0;  // max over the pre-phase of -(Δ² ln R), positive values are concave kinks
};

inline DecayAnalysis analyze_decay(const DecayCurve& c, double r_lo = 1e-3, double r_hi = 0.5) {
  DecayAnalysis a;
  if (c.size() == 0) return a;
  a.R0 = c.values.front();
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c.values[i] <= 1.0 && c.values[i - 1] > 1.0) {
      const double l0 = std::log(c.values[i - 1]), l1 = std::log(c.values[i]);
      const double f = l0 / (l0 - l1);
      a.t_cross = c.times[i - 1] + f * (c.times[i] - c.times[i - 1]);
      break;
    }
  }
  if (std::isfinite(a.t_cross) && a.R0 > 1.0) a.pre_slope = -std::log(a.R0) / a.t_cross;
  std::vector<double> t, y;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.values[i] >= r_lo && c.values[i] <= r_hi && c.values[i] > 0.0) {
      t.push_back(c.times[i]);
      y.push_back(std::log(c.values[i]));
    }
  a.terminal_points = t.size();
  if (t.size() >= 3) a.terminal = fit_line(t, y);
  if (a.pre_slope != 0.0) a.slope_ratio = std::abs(a.terminal.slope) / std::abs(a.pre_slope);
  return a;
}

// ---- randomized inequality suite --------------------------------------------------

struct SuiteCheck {
  std::string name;
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_excess = -kInf;  // max of lhs - rhs seen
  void record(double lhs, double rhs, double slack) {
    ++instances;
    if (std::isinf(rhs) && rhs > 0) return;
    worst_excess = std::max(worst_excess, lhs - rhs);
    if (!(lhs <= rhs + slack)) ++violations;
  }
};

namespace detail {

/// Positive 1D mixture density on a fixed grid; parameters from the
/// grid_instances stream.
inline GridDensity random_mixture(const GridDensity& layout, std::uint64_t seed, std::uint64_t instance, std::uint64_t which) {
  rng::NormalBlock nb(seed, rng::Stream::grid_instances, instance, which);
  const int K = 1 + static_cast<int>(3.0 * nb.uniform(0)) % 3;
  std::vector<double> mu(K), sd(K), lw(K);
  for (int k = 0; k < K; ++k) {
    mu[k] = -4.0 + 8.0 * nb.uniform(1 + 3 * k);
    sd[k] = 0.4 + 2.1 * nb.uniform(2 + 3 * k);
    lw[k] = std::log(0.1 + 0.9 * nb.uniform(3 + 3 * k));
  }
  return density_from_log(layout, [&](double x, double) {
    double mx = -kInf;
    std::vector<double> t(K);
    for (int k = 0; k < K; ++k) {
      const double z = (x - mu[k]) / sd[k];
      t[k] = lw[k] - 0.5 * z * z - std::log(sd[k]);
      mx = std::max(mx, t[k]);
    }
    double s = 0.0;
    for (double v : t) s += std::exp(v - mx);
    return mx + std::log(s);
  });
}

inline GaussianLaw random_gaussian(int d, std::uint64_t seed, std::uint64_t instance, std::uint64_t which) {
  rng::NormalBlock nb(seed, rng::Stream::grid_instances, instance, 1000 + which);
  GaussianLaw g;
  g.mean.resize(d);
  Eigen::MatrixXd B(d, d);
  std::size_t c = 0;
  for (int i = 0; i < d; ++i) g.mean(i) = nb[c++];
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) B(i, k) = 0.7 * nb[c++];
  g.cov = B * B.transpose() + 0.2 * Eigen::MatrixXd::Identity(d, d);
  return g;
}

}  // namespace detail

/// Change of measure, weak triangle (q = 2, 3, 5), monotonicity in q, the q = 2
/// chi-squared bridge and the comparison bounds, each on n randomized instances.
inline std::vector<SuiteCheck> run_inequality_suite(std::size_t n, std::uint64_t seed, double slack = 1e-9) {
  std::vector<SuiteCheck> checks = {{"change_of_measure"},     {"weak_triangle_q2"},      {"weak_triangle_q3"},
                                    {"weak_triangle_q5"},      {"renyi_monotone_in_q"},   {"chi2_bridge_q2"},
                                    {"grid_2tv2_le_kl_le_r2"}, {"gaussian_kl_le_r2"},     {"gaussian_w2_le_r2"}};
  const auto layout = GridDensity::zeros_1d(-10.0, 10.0, 256);
  for (std::size_t i = 0; i < n; ++i) {
    const auto mu = detail::random_mixture(layout, seed, i, 0);
    const auto nu = detail::random_mixture(layout, seed, i, 1);
    const auto pi = detail::random_mixture(layout, seed, i, 2);

    rng::NormalBlock nb(seed, rng::Stream::grid_instances, i, 99);
    const double a = -10.0 + 20.0 * nb.uniform(0), b = -10.0 + 20.0 * nb.uniform(1);
    std::vector<bool> mask(layout.size());
    for (std::size_t k = 0; k < mask.size(); ++k) {
      const double x = layout.center(0, k);
      mask[k] = x >= std::min(a, b) && x <= std::max(a, b);
    }
    const auto com = check_change_of_measure(mu, pi, mask, 0.0);
    checks[0].record(com.lhs, com.rhs, slack);

    const double qs3[3] = {2.0, 3.0, 5.0};
    for (int k = 0; k < 3; ++k) {
      const auto wt = check_weak_triangle(qs3[k], mu, nu, pi, 0.0);
      checks[1 + k].record(wt.lhs, wt.rhs, slack * std::max(1.0, wt.rhs));
    }

    const std::vector<double> orders = {1.5, 2.0, 3.0, 5.0, 8.0};
    const auto mono = check_order_monotonicity(mu, pi, orders, 0.0);
    checks[4].record(mono.lhs, mono.rhs, slack * std::max(1.0, mono.rhs));

    const double r2 = renyi_grid(2.0, mu, pi).value;
    const double bridge = std::log1p(chi2_grid(mu, pi));
    checks[5].record(std::abs(r2 - bridge), 0.0, slack * std::max(1.0, r2));

    const auto cmp = compare_to_r2(mu, pi, 0.0);
    checks[6].record(std::max(cmp.two_tv_sq, cmp.kl), cmp.r2, slack * std::max(1.0, cmp.r2));

    const int d = 1 + static_cast<int>(i % 4);
    const auto g1 = detail::random_gaussian(d, seed, i, 0);
    const auto g2 = detail::random_gaussian(d, seed, i, 1);
    const auto gc = compare_to_r2(g1, g2, 0.0);
    checks[7].record(gc.kl, gc.r2, slack * std::max(1.0, gc.r2));
    checks[8].record(gc.w2_term, gc.r2, slack * std::max(1.0, gc.r2));
  }
  return checks;
}

// ---- Monte-Carlo bound suite -------------------------------------------------------

struct NamedMgf {
  std::string name;
  MgfReport report;
};

/// Brownian bounds for d in {1, 2, 5} at half the admissible λ (quadratic and
/// fractional s in {0.5, 0.75}), displacement bounds for the 1D quadratic and the
/// 1D power potential with α = 1.5 from z0 in {0, 5}.
inline std::vector<NamedMgf> run_mgf_suite(std::size_t n_paths, std::uint64_t seed, double brownian_constant = 6.0,
                                           std::size_t inner_steps = 64) {
  std::vector<NamedMgf> out;
  const double h = 0.01;
  for (int d : {1, 2, 5}) {
    const double lam = 0.5 / (4.0 * h);
    out.push_back({"brownian_d" + std::to_string(d),
                   check_brownian_mgf_detailed(d, h, lam, n_paths, inner_steps, seed + d, brownian_constant)});
    for (double s : {0.5, 0.75}) {
      const double lf = 0.5 / std::pow(12.0 * d * h, s);
      out.push_back({"brownian_frac_d" + std::to_string(d) + "_s" + std::to_string(s).substr(0, 4),
                     check_brownian_mgf_fractional(d, h, s, lf, n_paths, inner_steps, seed + 100 + d)});
    }
  }
  const auto quad = make_builtin(Family::quadratic, 1);
  FamilyParams pp;
  pp.alpha = 1.5;
  const auto pw = make_builtin(Family::power, 1, pp);
  for (const auto* spec : {&quad, &pw}) {
    const double s = spec->smoothness.s;
    const double hh = std::min(h, 1.0 / (6.0 * spec->smoothness.L));
    const double lam = 0.5 / (96.0 * std::pow(1.0, s) * std::pow(hh, s));
    for (double z : {0.0, 5.0}) {
      const double z0[1] = {z};
      out.push_back({"displacement_" + spec->id + "_z" + std::to_string(static_cast<int>(z)),
                     check_displacement_mgf_detailed(*spec, z0, hh, lam, s, n_paths, seed + 200 + static_cast<int>(z), inner_steps)});
    }
  }
  return out;
}

// ---- initialization suite -------------------------------------------------------

struct InitCheck {
  std::string target;
  InitVariant variant = InitVariant::convex;
  InitDesign design;
  double grid_rinf = 0.0;
  bool holds = false;
};

/// Grid R_inf(μ0 ‖ π) (π̂ for the modified variant) against the init_design bound.
inline InitCheck check_init(const PotentialSpec& spec, InitVariant variant, const GridDensity& layout, double gamma = 1.0,
                            std::optional<double> R = std::nullopt) {
  InitCheck c;
  c.target = spec.id;
  c.variant = variant;
  const double RR = R.value_or(std::max(1.0, 2.0 * spec.mean_norm.value_or(1.0)));
  c.design = init_design(spec, variant, gamma, RR);
  const auto target = variant == InitVariant::modified ? make_modified(spec, gamma, RR).as_spec() : spec;
  const auto pi = target_density_grid(target, layout);
  const auto mu0 = gaussian_grid(c.design.law, layout);
  c.grid_rinf = renyi_inf_grid(mu0, pi);
  c.holds = c.grid_rinf <= c.design.bound;
  return c;
}

/// The 1D built-ins and the variants that apply to each.
inline std::vector<InitCheck> run_init_suite() {
  std::vector<InitCheck> out;
  const auto layout = GridDensity::zeros_1d(-30.0, 30.0, 6001);
  const auto quad = make_builtin(Family::quadratic, 1);
  const auto sn = make_builtin(Family::smoothed_norm, 1);
  FamilyParams pp;
  pp.alpha = 1.5;
  const auto pw = make_builtin(Family::power, 1, pp);
  for (const auto* spec : {&quad, &sn}) {
    for (auto v : {InitVariant::convex, InitVariant::general, InitVariant::modified}) out.push_back(check_init(*spec, v, layout));
  }
  for (auto v : {InitVariant::general, InitVariant::modified}) out.push_back(check_init(pw, v, layout));
  return out;
}

// ---- commands ---------------------------------------------------------------------

namespace harness {

struct Context {
  json config;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

inline Plan run_plan(const PlanRequest& req, const std::string& theorem) {
  if (theorem == "lsi") return plan_lsi(req);
  if (theorem == "log_concave") return plan_log_concave(req);
  if (theorem == "lo") return plan_lo(req);
  if (theorem == "mlsi") return plan_mlsi(req);
  throw config_error("unknown theorem '" + theorem + "' (expected lsi, log_concave, lo or mlsi)");
}

inline std::string default_theorem(const FIConstants& fi) {
  switch (fi.kind) {
    case FIKind::LSI: return "lsi";
    case FIKind::PI: return "log_concave";
    case FIKind::LO: return "lo";
    case FIKind::MLSI: return "mlsi";
  }
  return "lsi";
}

inline RunReport cmd_plan(const Context& ctx) {
  RunReport r;
  const auto& pj = cfg::section(ctx.config, "plan");
  const auto req = cfg::plan_request(pj);
  const auto theorem = cfg::get<std::string>(pj, "theorem", default_theorem(req.fi));
  const auto plan = run_plan(req, theorem);
  r.metrics["plan"] = to_json(plan);
  for (const auto& c : plan.preconditions) r.assertions.push_back({"precondition", c.relation, c.lhs, c.rhs, c.holds});
  r.assertions.push_back({"plan_invariants", "h > 0, N >= 1, T = N h", plan.T, plan.N * plan.h,
                          plan.h > 0.0 && plan.N >= 1.0 && plan.T == plan.N * plan.h});
  write_text(ctx.out, "plan.json", r.metrics["plan"].dump(2) + "\n");
  return r;
}

inline RunReport cmd_sample(const Context& ctx) {
  RunReport r;
  const auto spec = cfg::potential(cfg::section(ctx.config, "potential"));
  const auto& sj = cfg::section(ctx.config, "sample");
  const double h = cfg::need<double>(sj, "h");
  const auto N = cfg::need<std::uint64_t>(sj, "N");
  const auto n = cfg::get<std::size_t>(sj, "n_particles", 10000);
  const auto init = cfg::gaussian(cfg::section(sj, "init"), spec.d);
  LmcOptions opt;
  opt.record_norms = true;
  opt.norm_stride = cfg::get<std::size_t>(sj, "norm_stride", std::max<std::uint64_t>(1, N / 100));
  const auto res = lmc_run(spec, init, h, N, n, ctx.seed, opt);
  const auto mean = res.ensemble.mean();
  const auto cov = res.ensemble.covariance();
  r.metrics["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  r.metrics["cov_diag"] = std::vector<double>(cov.diagonal().data(), cov.diagonal().data() + cov.rows());
  if (!res.norms.empty()) r.metrics["final_max_norm"] = res.norms.back().max_norm;
  if (spec.precision) {
    const QuadraticTarget qt{*spec.precision};
    const auto law = lmc_law(qt, init, h, N);
    const double nn = static_cast<double>(n);
    for (int j = 0; j < spec.d; ++j) {
      const double se_m = std::sqrt(law.cov(j, j) / nn);
      const double se_v = law.cov(j, j) * std::sqrt(2.0 / (nn - 1.0));
      r.assertions.push_back(assert_le("mean_" + std::to_string(j), "|mean - oracle| <= 4 SE", std::abs(mean(j) - law.mean(j)), 4.0 * se_m));
      r.assertions.push_back(assert_le("var_" + std::to_string(j), "|var - oracle| <= 4 SE", std::abs(cov(j, j) - law.cov(j, j)), 4.0 * se_v));
    }
  }
  if (ctx.out) {
    std::ostringstream e, s;
    write_csv(e, res.ensemble);
    write_csv(s, res.norms);
    write_text(ctx.out, "ensemble.csv", e.str());
    write_text(ctx.out, "norms.csv", s.str());
  }
  return r;
}

inline RunReport cmd_bias_scan(const Context& ctx) {
  RunReport r;
  const auto& bj = cfg::section(ctx.config, "bias_scan");
  const auto ds = cfg::get<std::vector<int>>(bj, "d", {1, 2, 5, 10});
  const auto qs = cfg::scalar_or_list(bj, "q", {2.0, 4.0});
  const auto hs = cfg::scalar_or_list(bj, "h", {1e-3, 5e-4, 2.5e-4});
  const double ratio_tol = cfg::get(bj, "ratio_tol", 0.1);
  std::ostringstream csv;
  csv.precision(17);
  csv << "d,q,h,bias,bound,h_halving_ratio,d_doubling_ratio\n";
  json rows = json::array();
  for (int d : ds)
    for (double q : qs)
      for (double h : hs) {
        const auto t = QuadraticTarget::identity(d);
        const double bias = renyi_bias(t, h, q);
        const double bound = renyi_bias_bound(t, h, q);
        const double hr = bias / renyi_bias(t, h / 2.0, q);
        const double dr = renyi_bias(QuadraticTarget::identity(2 * d), h, q) / bias;
        csv << d << ',' << q << ',' << h << ',' << bias << ',' << bound << ',' << hr << ',' << dr << '\n';
        rows.push_back({{"d", d}, {"q", q}, {"h", h}, {"bias", bias}, {"bound", bound}, {"h_halving_ratio", hr}, {"d_doubling_ratio", dr}});
        const std::string tag = "d=" + std::to_string(d) + " q=" + std::to_string(q) + " h=" + std::to_string(h);
        r.assertions.push_back(assert_le("bias_bound " + tag, "bias <= 86 d h q^2 C L^2", bias, bound));
        r.assertions.push_back(assert_in("h_halving " + tag, hr, 2.0 * (1.0 - ratio_tol), 2.0 * (1.0 + ratio_tol)));
        r.assertions.push_back(assert_le("d_doubling " + tag, "|ratio - 2| <= 1e-10", std::abs(dr - 2.0), 1e-10));
      }
  r.metrics["rows"] = rows;
  write_text(ctx.out, "bias_scan.csv", csv.str());
  return r;
}

inline RunReport cmd_decay_curve(const Context& ctx) {
  RunReport r;
  const auto spec = cfg::potential(cfg::section(ctx.config, "potential"));
  if (spec.d > 2) throw config_error("decay-curve runs on 1D or 2D targets");
  const auto layout = cfg::grid(cfg::section(ctx.config, "grid"), spec.d);
  const auto& dj = cfg::section(ctx.config, "decay");
  const double q = cfg::get(dj, "q", 2.0);
  PropagationConfig pc;
  pc.potential = spec;
  pc.h = cfg::need<double>(dj, "h");
  pc.n_steps = cfg::need<std::size_t>(dj, "n_steps");
  pc.record_stride = cfg::get<std::size_t>(dj, "record_stride", 1);
  pc.backend = backend_from_string(cfg::get<std::string>(dj, "backend", "automatic"));
  const auto mode = cfg::get<std::string>(dj, "mode", "lmc");
  const auto init = cfg::gaussian(cfg::section(dj, "init"), spec.d);
  const auto target = target_density_grid(spec, layout);
  const auto mu0 = gaussian_grid(init, layout);
  DecayCurve curve;
  PropagationStats st;
  if (mode == "lmc") {
    curve = lmc_decay_curve(q, mu0, pc, target, &st);
  } else if (mode == "diffusion") {
    DiffusionOptions opt;
    opt.h_fine = cfg::get(dj, "h_fine", pc.h / 50.0);
    opt.check_refinement = cfg::get(dj, "check_refinement", false);
    auto res = propagate_diffusion_density(q, mu0, pc, target, opt);
    curve = std::move(res.curve);
    st = res.stats;
    if (res.refinement) r.metrics["refinement_rel_change"] = res.refinement->rel_change;
  } else {
    throw config_error("decay mode must be 'lmc' or 'diffusion'");
  }
  curve.meta["mode"] = mode;
  r.metrics["backend"] = to_string(st.backend);
  r.metrics["cells_per_sigma"] = st.cells_per_sigma;
  r.metrics["max_renorm_drift"] = st.max_renorm_drift;
  r.metrics["clipped_mass"] = st.clipped_mass;
  const auto an = analyze_decay(curve, cfg::get(dj, "fit_lo", 1e-3), cfg::get(dj, "fit_hi", 0.5));
  r.metrics["R0"] = an.R0;
  r.metrics["t_cross"] = std::isfinite(an.t_cross) ? json(an.t_cross) : json("inf");
  r.metrics["pre_slope"] = an.pre_slope;
  r.metrics["terminal_slope"] = an.terminal.slope;
  r.metrics["terminal_r_squared"] = an.terminal.r_squared;
  r.metrics["terminal_points"] = an.terminal_points;

  // Predicted upper-bound curve from the strongest inequality the target declares.
  std::optional<FIConstants> fi;
  for (FIKind k : {FIKind::LSI, FIKind::PI, FIKind::LO})
    if (!fi) fi = spec.find_fi(k);
  if (dj.contains("fi")) fi = cfg::fi(cfg::section(dj, "fi"));
  std::ostringstream os;
  write_csv(os, curve);
  write_text(ctx.out, "decay.csv", os.str());
  if (fi) {
    const auto pred = predict_continuous_decay(*fi, q, an.R0, curve.times);
    std::ostringstream ps;
    write_csv(ps, pred);
    write_text(ctx.out, "predicted.csv", ps.str());
    r.metrics["predicted_final"] = pred.values.back();
  }

  if (mode == "diffusion") {
    double worst = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) worst = std::max(worst, curve.values[i] - curve.values[i - 1]);
    r.assertions.push_back(assert_le("nonincreasing", "max increase of R_q(pi_t||pi) between records <= 1e-9",
                                     worst, 1e-9 * std::max(1.0, an.R0)));
  }
  const auto& ex = cfg::section(dj, "expect");
  if (cfg::get(ex, "terminal_rate", false)) {
    auto pi = fi && fi->kind == FIKind::PI ? fi : spec.find_fi(FIKind::PI);
    if (!pi) throw config_error("terminal_rate check needs a Poincaré constant");
    const double expected = -2.0 / (q * pi->C);
    r.assertions.push_back(assert_le("terminal_rate", "|slope - (-2/(q C_PI))| <= 0.15 |2/(q C_PI)|",
                                     std::abs(an.terminal.slope - expected), 0.15 * std::abs(expected)));
  }
  if (cfg::get(ex, "two_phase", false)) {
    r.assertions.push_back(assert_le("phase_crossing_finite", "t_cross < inf", an.t_cross, kInf / 2));
    r.assertions.push_back(assert_le("terminal_fit", "0.99 <= R^2", 0.99, an.terminal.r_squared));
    r.assertions.push_back(assert_le("pre_phase_shallow", "3 <= |terminal slope| / |pre-phase slope|", 3.0, an.slope_ratio));
  }
  if (cfg::get(ex, "flat", false)) {
    double mx = 0.0;
    for (double v : curve.values) mx = std::max(mx, v);
    r.assertions.push_back(assert_le("flat", "max_t R_q <= tol", mx, cfg::get(ex, "flat_tol", 1e-3)));
  }
  return r;
}

inline InitVariant variant_from_string(const std::string& s) {
  for (auto v : {InitVariant::convex, InitVariant::general, InitVariant::modified})
    if (s == to_string(v)) return v;
  throw config_error("unknown init variant '" + s + "'");
}

inline RunReport cmd_init_check(const Context& ctx) {
  RunReport r;
  const auto spec = cfg::potential(cfg::section(ctx.config, "potential"));
  if (spec.d != 1) throw config_error("init-check runs on 1D targets");
  const auto layout = cfg::grid(cfg::section(ctx.config, "grid"), 1);
  const auto& ij = cfg::section(ctx.config, "init_check");
  const auto variants = cfg::get<std::vector<std::string>>(ij, "variants", {"convex", "general", "modified"});
  const double gamma = cfg::get(ij, "gamma", 1.0);
  std::optional<double> R;
  if (ij.contains("R")) R = cfg::need<double>(ij, "R");
  json rows = json::array();
  for (const auto& name : variants) {
    const auto c = check_init(spec, variant_from_string(name), layout, gamma, R);
    rows.push_back({{"variant", name}, {"bound", c.design.bound}, {"grid_rinf", c.grid_rinf}, {"formula", c.design.formula},
                    {"mean_norm", c.design.mean_norm}});
    r.assertions.push_back(assert_le("init_" + name, "grid R_inf(mu0||pi) <= bound", c.grid_rinf, c.design.bound));
  }
  r.metrics["variants"] = rows;
  return r;
}

inline RunReport cmd_verify(const Context& ctx) {
  RunReport r;
  const auto& vj = cfg::section(ctx.config, "verify");
  const auto n_inst = cfg::get<std::size_t>(vj, "instances", 1000);
  const auto n_paths = cfg::get<std::size_t>(vj, "mgf_paths", 100000);
  const double bconst = cfg::get(vj, "brownian_constant", 6.0);
  const auto n_pairs = cfg::get<std::size_t>(vj, "holder_pairs", 20000);

  for (const auto& c : run_inequality_suite(n_inst, ctx.seed))
    r.assertions.push_back(assert_le(c.name, "violations over " + std::to_string(c.instances) + " instances == 0",
                                     static_cast<double>(c.violations), 0.0));
  for (const auto& m : run_mgf_suite(n_paths, ctx.seed, bconst))
    r.assertions.push_back({m.name, m.report.bound + " (mean <= rhs (1 + 3 SE/mean))", m.report.mean, m.report.allowed, m.report.holds});
  for (const auto& c : run_init_suite())
    r.assertions.push_back(assert_le("init_" + c.target + "_" + to_string(c.variant), "grid R_inf <= " + c.design.formula,
                                     c.grid_rinf, c.design.bound));
  FamilyParams pp;
  pp.alpha = 1.5;
  for (const auto& spec : {make_builtin(Family::quadratic, 2), make_builtin(Family::smoothed_norm, 3), make_builtin(Family::power, 2, pp),
                           make_builtin(Family::perturbed_power, 2, pp)}) {
    const auto h = verify_holder(spec, n_pairs, ctx.seed);
    r.assertions.push_back(assert_le("holder_" + spec.id, "sampled sup |dgrad| / |dx|^s <= L", h.max_ratio, h.declared_L * (1.0 + 1e-9)));
  }
  return r;
}

/// Runs one command; the config echo and seed are filled in here.
inline RunReport run_command(const std::string& command, const json& config, std::uint64_t seed,
                             const std::optional<std::filesystem::path>& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{config, seed, out};
  RunReport r;
  if (command == "plan") r = cmd_plan(ctx);
  else if (command == "sample") r = cmd_sample(ctx);
  else if (command == "bias-scan") r = cmd_bias_scan(ctx);
  else if (command == "decay-curve") r = cmd_decay_curve(ctx);
  else if (command == "init-check") r = cmd_init_check(ctx);
  else if (command == "verify") r = cmd_verify(ctx);
  else throw config_error("unknown command '" + command + "'");
  r.command = command;
  r.config = config;
  r.seed = seed;
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(out, "report.json", r.to_json().dump(2) + "\n");
  return r;
}

}  // namespace harness
}  // namespace langevin_lab
