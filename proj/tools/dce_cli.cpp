// Command-line front end: run a configured scenario, list or describe the
// registry, or run the identity suite.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "dce/scenarios.hpp"

namespace {

int cmd_run(const std::string& path) {
  const dce::ScenarioConfig config = dce::load_config(path);
  const dce::RunResult r = dce::run_config(config);
  for (const auto& a : r.artifacts) std::cout << "wrote " << a.string() << "\n";
  std::cout << config.scenario << ": " << (r.passed ? "ok" : "checks failed") << "\n";
  return r.passed ? 0 : 4;
}

int cmd_list() {
  for (const auto& s : dce::scenario_registry()) {
    std::printf("%-26s %s\n", s.name.c_str(), s.summary.c_str());
  }
  return 0;
}

int cmd_check(std::uint64_t seed, int draws) {
  bool ok = true;
  for (const auto& c : dce::run_identity_suite(seed, draws)) {
    std::printf("%-32s draws=%d max_rel=%.3e tol=%.0e %s\n", c.name.c_str(), c.draws,
                c.max_relative_error, c.tolerance, c.passed ? "PASS" : "FAIL");
    ok = ok && c.passed;
  }
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical Casimir decoherence simulator"};
  app.set_version_flag("--version", dce::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the scenario described by a JSON config");
  run->add_option("config", config_path, "Config file")->required();

  auto* list = app.add_subcommand("list", "List the registered scenarios");

  std::string name;
  auto* describe = app.add_subcommand("describe", "Describe one scenario");
  describe->add_option("name", name, "Scenario name")->required();

  std::uint64_t seed = 20240601;
  int draws = 1000;
  auto* check = app.add_subcommand("check", "Run the cross-route identity suite");
  check->add_option("--seed", seed, "Random seed");
  check->add_option("--draws", draws, "Parameter draws")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path);
    if (*list) return cmd_list();
    if (*describe) {
      std::cout << dce::describe(name);
      return 0;
    }
    if (*check) return cmd_check(seed, draws);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dce::exit_code_for(e);
  }
  return 0;
}
