#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "langevin_lab/harness.hpp"

namespace ll = langevin_lab;

int main(int argc, char** argv) {
  CLI::App app{"Langevin Monte Carlo planning, sampling and verification"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  for (const char* name : {"plan", "sample", "bias-scan", "decay-curve", "init-check", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "output directory for CSV and report files");
    sub->add_option("--seed", seed, "RNG seed (overrides the config, default 0)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ll::json config;
  try {
    std::ifstream is(config_path);
    if (!is) throw ll::config_error("cannot open config file '" + config_path + "'");
    config = ll::json::parse(is);
  } catch (const ll::json::parse_error& e) {
    std::cerr << "config parse error: " << e.what() << '\n';
    return 2;
  } catch (const ll::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    const std::uint64_t s = seed ? *seed : ll::cfg::get<std::uint64_t>(config, "seed", 0);
    std::optional<std::filesystem::path> out;
    if (!out_dir.empty()) out = out_dir;
    else if (config.contains("out")) out = ll::cfg::need<std::string>(config, "out");
    const auto report = ll::harness::run_command(command, config, s, out);
    std::cout << report.to_json().dump(2) << '\n';
    for (const auto& a : report.assertions)
      if (!a.pass) std::cerr << "FAIL " << a.name << ": " << a.relation << " (lhs=" << a.lhs << ", rhs=" << a.rhs << ")\n";
    return report.passed() ? 0 : 1;
  } catch (const ll::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ll::precondition_error& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 2;
  } catch (const ll::grid_error& e) {
    std::cerr << "grid error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
