#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dce/errors.hpp"
#include "dce/gaussian.hpp"
#include "dce/params.hpp"
#include "dce/spectra.hpp"
#include "dce/wigner.hpp"

namespace dce {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

enum class Pipeline {
  VacuumMirror,    // closed forms for the 1D mirror
  VacuumSphere,    // closed forms for the Rayleigh sphere
  ThermalFree,     // blackbody sphere, free particle
  Sieve,           // Gaussian predictability sieve
  WignerCat,       // grid evolution of a cat state, fringe decay
  WignerGaussian,  // grid evolution of a Gaussian against the moment equations
  Identities,      // cross-route consistency checks
  PairEmission,    // which-way overlap from pair emission
};

struct ScenarioInfo {
  std::string name;
  Pipeline pipeline;
  std::string summary;
  std::vector<std::string> formulas;  // closed forms the scenario evaluates
  Json defaults;                      // full default configuration
};

const std::vector<ScenarioInfo>& scenario_registry();
/// Throws UnknownScenario.
const ScenarioInfo& find_scenario(const std::string& name);
/// Human-readable description: summary, formulas and default parameters.
std::string describe(const std::string& name);

struct SolverSettings {
  std::size_t nx = 256;
  std::size_t np = 256;
  std::optional<double> x_half_width;  // default: fitted to the cat
  std::optional<double> p_half_width;
  double margin = 1.5;
  double dt = 0.01;                    // nondimensional
  double t_end = 1.0;                  // nondimensional
  int sample_every = 10;               // steps between samples
  bool sample_periods = false;         // sample at whole rotation periods
  ShiftMethod shift = ShiftMethod::Remap;
};

struct ScenarioConfig {
  std::string scenario;
  MirrorParams mirror;
  std::optional<CatSpec> cat;
  std::optional<CoefficientSet> coefficients;  // SI override of the derived set
  std::optional<ScaledModel> model;            // nondimensional model override
  std::optional<GaussianState> initial;        // nondimensional Gaussian state
  double lobe_scale = 1.0;
  CatOrientation orientation = CatOrientation::PositionSeparated;
  SolverSettings solver;
  std::uint64_t seed = 20240601;
  int draws = 1000;
  double t_max_td = 0.1;  // pair emission horizon in units of t_d
  int samples = 11;
  std::filesystem::path output_dir;
  std::vector<std::string> formats = {"csv", "json"};
  Json echo;  // effective configuration after merging defaults
};

/// Merges `user` over the scenario defaults and validates the result.
/// Unknown keys and wrong types raise ConfigError.
ScenarioConfig parse_config(const Json& user);
ScenarioConfig load_config(const std::filesystem::path& path);

struct RunResult {
  Json summary;
  Json manifest;
  std::vector<std::filesystem::path> artifacts;
  bool passed = true;  // false when a built-in check of the scenario failed
};

/// Runs the scenario pipeline and writes the artifacts to `out_dir`. The
/// DCE_OUTPUT_DIR environment variable, when set, replaces the configured
/// directory in `run_config`.
RunResult run(const ScenarioConfig& config, const std::filesystem::path& out_dir);
RunResult run_config(const ScenarioConfig& config);

struct IdentityCheck {
  std::string name;
  int draws = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Draws random valid parameters and compares the routes to t_d that must
/// agree algebraically.
std::vector<IdentityCheck> run_identity_suite(std::uint64_t seed, int draws,
                                              double tolerance = 1e-12);

/// Process exit code for an exception escaping a run.
int exit_code_for(const std::exception& e);

/// Writes `text` to `path` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace dce
