#include "dce/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "dce/decoherence.hpp"
#include "dce/pair_emission.hpp"

namespace dce {

namespace fs = std::filesystem;
using std::numbers::pi;

// --- registry --------------------------------------------------------------

namespace {

Json mirror_json(double mass, double omega0, double radius, const char* geometry,
                 double temperature) {
  return Json{{"mass", mass},
              {"omega0", omega0},
              {"radius", radius},
              {"geometry", geometry},
              {"temperature", temperature},
              {"delta_omega", 0.0}};
}

Json base_defaults(const std::string& name) {
  return Json{{"scenario", name}, {"output", {{"directory", "runs/" + name}, {"formats", {"csv", "json"}}}}};
}

std::vector<ScenarioInfo> build_registry() {
  std::vector<ScenarioInfo> r;

  {
    Json d = base_defaults("1d-mirror-vacuum");
    d["mirror"] = mirror_json(1e-21, 1e10, 0.0, "mirror1d", 0.0);
    d["cat"] = {{"alpha", 5.0}, {"phase", 0.0}};
    r.push_back({"1d-mirror-vacuum", Pipeline::VacuumMirror,
                 "Perfect 1D mirror in the vacuum: pair-emission damping and the decoherence time "
                 "of a cat state, by amplitude, by separation and by wavepacket velocity.",
                 {"Gamma = hbar w0^2 / (12 pi M c^2)", "t_d = 1 / (4 |alpha|^2 Gamma)",
                  "t_d = 4 (dx0 / dx)^2 / Gamma", "t_d = 3 (c / v)^2 (2 pi / w0)",
                  "roots of eps s^3 - s^2 - w0^2 = 0, eps = hbar / (6 pi M c^2)"},
                 d});
  }
  {
    Json d = base_defaults("sphere-rayleigh-vacuum");
    d["mirror"] = mirror_json(1e-24, 1e10, 1e-9, "sphere3d", 0.0);
    d["cat"] = {{"alpha", 20.0}, {"phase", 0.0}};
    r.push_back({"sphere-rayleigh-vacuum", Pipeline::VacuumSphere,
                 "Small perfectly reflecting sphere in the vacuum, Rayleigh regime w0 R / c << 1.",
                 {"Gamma = hbar w0^2 (w0 R / c)^6 / (1296 pi M c^2)",
                  "t_d = 324 (c / v)^2 (c / w0 R)^6 (2 pi / w0)"},
                 d});
  }
  {
    Json d = base_defaults("sphere-thermal-free");
    d["mirror"] = mirror_json(8.4e-9, 0.0, 1e-4, "sphere3d", 300.0);
    d["cat"] = {{"delta_x", 1e-9}, {"phase", 0.0}};
    r.push_back({"sphere-thermal-free", Pipeline::ThermalFree,
                 "Free sphere in blackbody radiation at high temperature.",
                 {"Gamma = (4 pi^3 / 45) (kT)^4 R^2 / (hbar^3 c^4 M)", "lambda_T = hbar / sqrt(2 M k T)",
                  "t_d = (lambda_T / dx)^2 / Gamma",
                  "t_d = 45 hbar^5 c^4 / (8 pi^3 (kT)^5 R^2 dx^2)"},
                 d});
  }
  {
    Json d = base_defaults("cosmic-background-sphere");
    d["mirror"] = mirror_json(0.01, 0.0, 0.01, "sphere3d", 2.7);
    d["cat"] = {{"delta_x", 1e-6}, {"phase", 0.0}};
    r.push_back({"cosmic-background-sphere", Pipeline::ThermalFree,
                 "A 1 cm sphere in the 2.7 K cosmic background with a 1 micron separation: "
                 "t_d * dx^2 = 2.7e-21 s m^2, nanoseconds at dx = 1 micron.",
                 {"t_d = 45 hbar^5 c^4 / (8 pi^3 (kT)^5 R^2 dx^2)"},
                 d});
  }
  {
    Json d = base_defaults("sieve-pointer-states");
    d["mirror"] = mirror_json(1e-21, 1e10, 0.0, "mirror1d", 0.0);
    // Desk scale: Gamma / w0 = 0.01, vacuum diffusion hbar M w0 Gamma.
    d["coefficients"] = {{"gamma", 1e8}, {"d1", 1.054571817e-34 * 1e-21 * 1e10 * 1e8},
                         {"d2", 0.0}, {"omega_star", 1e10}};
    r.push_back({"sieve-pointer-states", Pipeline::Sieve,
                 "Predictability sieve over pure squeezed states of the damped oscillator; the "
                 "least entropy production selects the coherent states.",
                 {"dS/dt = Tr(rho^2) d(det sigma)/dt / (2 det sigma), averaged over one period",
                  "D1 = M Gamma hbar w0 coth(hbar w0 / 2kT)"},
                 d});
  }
  {
    Json d = base_defaults("wigner-cat-highT");
    d["cat"] = {{"alpha", 2.0}, {"phase", 0.0}, {"orientation", "position"}, {"lobe_scale", 1.0}};
    // Non-oscillatory desk model: t_d = 1 / (dpp dx^2) = 1 time unit.
    d["model"] = {{"drift", 0.25}, {"spring", 0.0}, {"damping", 0.002}, {"dpp", 1.0 / 32.0}, {"d2", 0.0}};
    d["solver"] = {{"nx", 256}, {"np", 256}, {"dt", 0.01}, {"t_end", 4.0}, {"sample_every", 5},
                   {"sample_periods", false}, {"shift", "remap"}, {"margin", 1.5},
                   {"x_half_width", 14.0}};
    r.push_back({"wigner-cat-highT", Pipeline::WignerCat,
                 "Grid evolution of a cat state under momentum diffusion without a restoring "
                 "force; the fringe visibility decays with t_d = hbar^2 / (D1 dx^2).",
                 {"t_d = hbar^2 / (D1 dx^2)"},
                 d});
  }
  {
    Json d = base_defaults("wigner-cat-oscillator");
    d["cat"] = {{"alpha", 2.0}, {"phase", 0.0}, {"orientation", "position"}, {"lobe_scale", 1.0}};
    // t_d = 2 / (dpp dx^2) = two rotation periods.
    d["model"] = {{"drift", 1.0}, {"spring", 1.0}, {"damping", 0.001},
                  {"dpp", 1.0 / (32.0 * 2.0 * pi)}, {"d2", 0.0}};
    d["solver"] = {{"nx", 256}, {"np", 256}, {"dt", 2.0 * pi / 100.0}, {"t_end", 8.0 * 2.0 * pi},
                   {"sample_every", 1}, {"sample_periods", true}, {"shift", "remap"},
                   {"margin", 1.5}};
    r.push_back({"wigner-cat-oscillator", Pipeline::WignerCat,
                 "Grid evolution of a cat state in a weakly damped oscillator, sampled at whole "
                 "periods; rotation averaging doubles the decoherence time.",
                 {"t_d = 2 hbar^2 / (D1 dx^2)"},
                 d});
  }
  {
    Json d = base_defaults("wigner-gaussian-oracle");
    d["model"] = {{"drift", 1.0}, {"spring", 1.0}, {"damping", 0.2}, {"dpp", 0.15}, {"d2", 0.0}};
    d["initial"] = {{"mean_x", 3.0}, {"mean_p", 0.0}, {"cov_xx", 0.5}, {"cov_xp", 0.0}, {"cov_pp", 0.5}};
    d["solver"] = {{"nx", 256}, {"np", 256}, {"dt", 2.0 * pi * 0.005}, {"t_end", 10.0},
                   {"sample_every", 10}, {"sample_periods", false}, {"shift", "remap"},
                   {"x_half_width", 12.0}, {"p_half_width", 12.0}};
    r.push_back({"wigner-gaussian-oracle", Pipeline::WignerGaussian,
                 "Grid evolution of a displaced Gaussian over one damping time, compared with the "
                 "closed-form moment equations.",
                 {"d<x>/dt = <p>/M, d<p>/dt = -M w^2 <x> - 2 Gamma <p>",
                  "dVpp/dt = -2 M w^2 Vxp - 4 Gamma Vpp + 2 D1"},
                 d});
  }
  {
    Json d = base_defaults("identity-suite");
    d["identity"] = {{"seed", 20240601}, {"draws", 1000}};
    r.push_back({"identity-suite", Pipeline::Identities,
                 "Random parameter draws checking that independent routes to t_d agree.",
                 {"1 / (4 |alpha|^2 Gamma) = 4 (dx0 / dx)^2 / Gamma",
                  "1 / (4 |alpha|^2 Gamma_1D) = 3 (c / v)^2 (2 pi / w0)",
                  "1 / (4 |alpha|^2 Gamma_sphere) = 324 (c / v)^2 (c / w0 R)^6 (2 pi / w0)",
                  "(lambda_T / dx)^2 / Gamma_thermal = 45 hbar^5 c^4 / (8 pi^3 (kT)^5 R^2 dx^2)"},
                 d});
  }
  {
    Json d = base_defaults("pair-emission");
    d["mirror"] = mirror_json(1e-21, 1e10, 0.0, "mirror1d", 0.0);
    d["cat"] = {{"alpha", 5.0}, {"phase", 0.0}};
    d["pair"] = {{"t_max_td", 0.1}, {"samples", 11}};
    r.push_back({"pair-emission", Pipeline::PairEmission,
                 "Which-way information carried by emitted photon pairs: literal first-order "
                 "overlap against its exponentiated form.",
                 {"sum |b|^2 = 2 |alpha|^2 Gamma t", "<e-|e+> = 1 - 4 |alpha|^2 Gamma t",
                  "<e-|e+> = exp(-t / t_d)"},
                 d});
  }
  return r;
}

}  // namespace

const std::vector<ScenarioInfo>& scenario_registry() {
  static const std::vector<ScenarioInfo> registry = build_registry();
  return registry;
}

const ScenarioInfo& find_scenario(const std::string& name) {
  for (const auto& s : scenario_registry()) {
    if (s.name == name) return s;
  }
  throw UnknownScenario("unknown scenario '" + name + "' (see `list`)");
}

std::string describe(const std::string& name) {
  const ScenarioInfo& s = find_scenario(name);
  std::ostringstream out;
  out << s.name << "\n  " << s.summary << "\n\nformulas:\n";
  for (const auto& f : s.formulas) out << "  " << f << "\n";
  out << "\ndefault configuration:\n" << s.defaults.dump(2) << "\n";
  return out.str();
}

// --- configuration ---------------------------------------------------------

namespace {

void reject_unknown(const Json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
  }
}

template <class T>
T get(const Json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("missing or invalid '" + where + "." + key + "'");
  }
}

template <class T>
std::optional<T> get_opt(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

ShiftMethod shift_from_string(const std::string& s) {
  if (s == "remap") return ShiftMethod::Remap;
  if (s == "spectral") return ShiftMethod::Spectral;
  throw ConfigError("solver.shift must be 'remap' or 'spectral'");
}

CatOrientation orientation_from_string(const std::string& s) {
  if (s == "position") return CatOrientation::PositionSeparated;
  if (s == "momentum") return CatOrientation::MomentumSeparated;
  throw ConfigError("cat.orientation must be 'position' or 'momentum'");
}

}  // namespace

ScenarioConfig parse_config(const Json& user) {
  reject_unknown(user, "config",
                 {"scenario", "mirror", "cat", "coefficients", "model", "initial", "solver",
                  "identity", "pair", "output"});
  const auto name = get<std::string>(user, "scenario", "config");
  const ScenarioInfo& info = find_scenario(name);

  // Sections that describe one object are replaced as a whole, the rest merge.
  Json merged = info.defaults;
  for (const auto& [key, value] : user.items()) {
    const bool whole = key == "cat" || key == "model" || key == "initial" || key == "coefficients";
    if (whole || !value.is_object() || !merged.contains(key)) {
      merged[key] = value;
    } else {
      for (const auto& [k2, v2] : value.items()) merged[key][k2] = v2;
    }
  }

  ScenarioConfig c;
  c.scenario = name;
  c.echo = merged;

  if (merged.contains("mirror")) {
    const Json& m = merged["mirror"];
    reject_unknown(m, "mirror", {"mass", "omega0", "radius", "geometry", "temperature", "delta_omega"});
    c.mirror.mass = get<double>(m, "mass", "mirror");
    c.mirror.omega0 = get_opt<double>(m, "omega0", "mirror").value_or(0.0);
    c.mirror.radius = get_opt<double>(m, "radius", "mirror").value_or(0.0);
    c.mirror.geometry = geometry_from_string(
        get_opt<std::string>(m, "geometry", "mirror").value_or("mirror1d"));
    c.mirror.temperature = get_opt<double>(m, "temperature", "mirror").value_or(0.0);
    c.mirror.delta_omega = get_opt<double>(m, "delta_omega", "mirror").value_or(0.0);
  }
  if (merged.contains("cat")) {
    const Json& m = merged["cat"];
    reject_unknown(m, "cat", {"alpha", "delta_x", "phase", "orientation", "lobe_scale"});
    const auto alpha = get_opt<double>(m, "alpha", "cat");
    const auto dx = get_opt<double>(m, "delta_x", "cat");
    const double phase = get_opt<double>(m, "phase", "cat").value_or(0.0);
    if (alpha.has_value() == dx.has_value()) {
      throw ConfigError("cat needs exactly one of 'alpha' and 'delta_x'");
    }
    c.cat = alpha ? CatSpec::from_alpha(*alpha, phase) : CatSpec::from_separation(*dx, phase);
    c.orientation = orientation_from_string(
        get_opt<std::string>(m, "orientation", "cat").value_or("position"));
    c.lobe_scale = get_opt<double>(m, "lobe_scale", "cat").value_or(1.0);
  }
  if (merged.contains("coefficients")) {
    const Json& m = merged["coefficients"];
    reject_unknown(m, "coefficients", {"gamma", "d1", "d2", "omega_star"});
    CoefficientSet cs;
    cs.gamma = get<double>(m, "gamma", "coefficients");
    cs.d1 = get<double>(m, "d1", "coefficients");
    cs.d2 = get_opt<double>(m, "d2", "coefficients").value_or(0.0);
    cs.omega_star = get_opt<double>(m, "omega_star", "coefficients").value_or(c.mirror.omega_star());
    c.coefficients = cs;
  }
  if (merged.contains("model")) {
    const Json& m = merged["model"];
    reject_unknown(m, "model", {"drift", "spring", "damping", "dpp", "d2"});
    ScaledModel sm;
    sm.drift = get_opt<double>(m, "drift", "model").value_or(1.0);
    sm.spring = get_opt<double>(m, "spring", "model").value_or(1.0);
    sm.damping = get_opt<double>(m, "damping", "model").value_or(0.0);
    sm.dpp = get_opt<double>(m, "dpp", "model").value_or(0.0);
    sm.d2 = get_opt<double>(m, "d2", "model").value_or(0.0);
    c.model = sm;
  }
  if (merged.contains("initial")) {
    const Json& m = merged["initial"];
    reject_unknown(m, "initial", {"mean_x", "mean_p", "cov_xx", "cov_xp", "cov_pp"});
    c.initial = GaussianState{get<double>(m, "mean_x", "initial"), get<double>(m, "mean_p", "initial"),
                              get<double>(m, "cov_xx", "initial"), get<double>(m, "cov_xp", "initial"),
                              get<double>(m, "cov_pp", "initial")};
  }
  if (merged.contains("solver")) {
    const Json& m = merged["solver"];
    reject_unknown(m, "solver", {"nx", "np", "x_half_width", "p_half_width", "margin", "dt", "t_end",
                                 "sample_every", "sample_periods", "shift"});
    SolverSettings& s = c.solver;
    s.nx = get_opt<std::size_t>(m, "nx", "solver").value_or(s.nx);
    s.np = get_opt<std::size_t>(m, "np", "solver").value_or(s.np);
    s.x_half_width = get_opt<double>(m, "x_half_width", "solver");
    s.p_half_width = get_opt<double>(m, "p_half_width", "solver");
    s.margin = get_opt<double>(m, "margin", "solver").value_or(s.margin);
    s.dt = get_opt<double>(m, "dt", "solver").value_or(s.dt);
    s.t_end = get_opt<double>(m, "t_end", "solver").value_or(s.t_end);
    s.sample_every = get_opt<int>(m, "sample_every", "solver").value_or(s.sample_every);
    s.sample_periods = get_opt<bool>(m, "sample_periods", "solver").value_or(s.sample_periods);
    s.shift = shift_from_string(get_opt<std::string>(m, "shift", "solver").value_or("remap"));
    if (!(s.dt > 0.0) || !(s.t_end > 0.0) || s.sample_every < 1) {
      throw ConfigError("solver.dt, solver.t_end and solver.sample_every must be positive");
    }
  }
  if (merged.contains("identity")) {
    const Json& m = merged["identity"];
    reject_unknown(m, "identity", {"seed", "draws"});
    c.seed = get_opt<std::uint64_t>(m, "seed", "identity").value_or(c.seed);
    c.draws = get_opt<int>(m, "draws", "identity").value_or(c.draws);
  }
  if (merged.contains("pair")) {
    const Json& m = merged["pair"];
    reject_unknown(m, "pair", {"t_max_td", "samples"});
    c.t_max_td = get_opt<double>(m, "t_max_td", "pair").value_or(c.t_max_td);
    c.samples = get_opt<int>(m, "samples", "pair").value_or(c.samples);
    if (c.samples < 2) throw ConfigError("pair.samples must be at least 2");
  }
  if (merged.contains("output")) {
    const Json& m = merged["output"];
    reject_unknown(m, "output", {"directory", "formats"});
    c.output_dir = get_opt<std::string>(m, "directory", "output").value_or("runs/" + name);
    if (m.contains("formats")) c.formats = get<std::vector<std::string>>(m, "formats", "output");
    for (const auto& f : c.formats) {
      if (f != "csv" && f != "json") throw ConfigError("output.formats accepts 'csv' and 'json'");
    }
  }
  return c;
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// --- output ----------------------------------------------------------------

void write_atomic(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw IoError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Row {
  double t, visibility, purity;
  GaussianState moments;
};

std::string csv_text(const std::string& time_column, const std::vector<Row>& rows) {
  std::string out = time_column + ",visibility,purity,mean_x,mean_p,cov_xx,cov_xp,cov_pp\n";
  for (const Row& r : rows) {
    out += fmt17(r.t) + ',' + fmt17(r.visibility) + ',' + fmt17(r.purity) + ',' +
           fmt17(r.moments.mean_x) + ',' + fmt17(r.moments.mean_p) + ',' +
           fmt17(r.moments.cov_xx) + ',' + fmt17(r.moments.cov_xp) + ',' +
           fmt17(r.moments.cov_pp) + '\n';
  }
  return out;
}

Json warnings_json(const Warnings& w) {
  Json out = Json::array();
  for (const auto& x : w) out.push_back({{"code", x.code}, {"message", x.message}});
  return out;
}

Json td_json(const TdResult& r) {
  Json in = Json::object();
  for (const auto& [k, v] : r.inputs) in[k] = v;
  return {{"td_seconds", r.td}, {"regime", to_string(r.regime)},
          {"averaging_factor", r.averaging_factor}, {"inputs", in},
          {"warnings", warnings_json(r.warnings)}};
}

Json coefficients_json(const CoefficientSet& c) {
  return {{"gamma", c.gamma}, {"d1", c.d1}, {"d2", c.d2}, {"omega_star", c.omega_star}};
}

Json moments_json(const GaussianState& s) {
  return {{"mean_x", s.mean_x}, {"mean_p", s.mean_p}, {"cov_xx", s.cov_xx},
          {"cov_xp", s.cov_xp}, {"cov_pp", s.cov_pp}};
}

Json regime_json(const ValidationReport& v) {
  Json checks = Json::array();
  for (const auto& c : v.checks) {
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold},
                      {"passed", c.passed}});
  }
  return {{"checks", checks}, {"free_particle", v.free_particle},
          {"warnings", warnings_json(v.warnings)}};
}

const CatSpec& require_cat(const ScenarioConfig& c) {
  if (!c.cat) throw ConfigError("scenario '" + c.scenario + "' needs a 'cat' section");
  return *c.cat;
}

CoefficientSet coefficients(const ScenarioConfig& c, Warnings& w) {
  if (c.coefficients) return *c.coefficients;
  return coefficients_for(c.mirror, PhysicalConstants::codata(), &w);
}

// Everything a pipeline produces before it is written out.
struct Outcome {
  Json summary = Json::object();
  Json predictions = Json::object();
  std::optional<CoefficientSet> coefficients;
  std::string time_column = "t_seconds";
  std::vector<Row> rows;
  bool passed = true;
};

// --- closed-form pipelines --------------------------------------------------

Outcome run_vacuum(const ScenarioConfig& c, bool sphere) {
  const auto k = PhysicalConstants::codata();
  const MirrorParams& p = c.mirror;
  const CatSpec& cat = require_cat(c);
  require_physical(p);
  Outcome o;
  Warnings w;
  const ValidationReport report = validate(p, cat, k);
  const CoefficientSet cs = coefficients(c, w);
  o.coefficients = cs;
  const double alpha = cat.alpha_mag(p, k);
  const double dx = cat.delta_x(p, k);
  const double dx0 = position_uncertainty(p, k);
  const double v_over_c = wavepacket_velocity(p, alpha, k) / k.c;

  o.predictions["cat_vacuum"] = td_json(td_cat_vacuum(alpha, cs.gamma));
  o.predictions["separation"] = td_json(td_from_separation(dx, dx0, cs.gamma));
  o.predictions["diffusion_oscillatory"] = td_json(td_from_diffusion(cs.d1, dx, true, k));
  try {
    o.predictions["relative_velocity"] =
        td_json(sphere ? td_relative_sphere(v_over_c, p.omega0, p.radius, k)
                       : td_relative_1d(v_over_c, p.omega0));
  } catch (const RegimeViolation& e) {
    o.predictions["relative_velocity"] = {{"error", e.what()}};
  }

  o.summary["kinematics"] = {{"alpha_mag", alpha}, {"delta_x", dx}, {"delta_x0", dx0},
                             {"v_over_c", v_over_c},
                             {"hbar_omega0_over_mc2", k.hbar * p.omega0 / (p.mass * k.c * k.c)}};
  if (!sphere) {
    const CharacteristicRoots roots = characteristic_roots(p, k);
    o.summary["characteristic_roots"] = {
        {"damped_real", roots.damped_plus.real()},
        {"damped_imag", roots.damped_plus.imag()},
        {"runaway", roots.runaway},
        {"runaway_reference", 6.0 * pi * p.mass * k.c * k.c / k.hbar},
        {"damped_real_plus_gamma_relative", (roots.damped_plus.real() + cs.gamma) / cs.gamma}};
  }
  o.summary["regime"] = regime_json(report);
  o.summary["warnings"] = warnings_json(w);
  return o;
}

Outcome run_thermal(const ScenarioConfig& c) {
  const auto k = PhysicalConstants::codata();
  const MirrorParams& p = c.mirror;
  const CatSpec& cat = require_cat(c);
  require_physical(p);
  if (cat.primary() != CatSpec::Primary::Separation && p.omega0 == 0.0) {
    throw ConfigError("a free particle needs the cat given by 'delta_x'");
  }
  Outcome o;
  Warnings w;
  const ValidationReport report = validate(p, cat, k);
  const CoefficientSet cs = coefficients(c, w);
  o.coefficients = cs;
  const double dx = cat.delta_x(p, k);
  const double lambda = thermal_wavelength(p, k);

  const TdResult closed = td_thermal_sphere_free(p.temperature, p.radius, dx, p.mass, k);
  o.predictions["thermal_sphere_free"] = td_json(closed);
  o.predictions["high_t"] = td_json(td_high_T(lambda, dx, cs.gamma, p.temperature, k));
  o.predictions["diffusion_free"] = td_json(td_from_diffusion(cs.d1, dx, false, k));

  o.summary["kinematics"] = {{"delta_x", dx}, {"lambda_t", lambda}};
  o.summary["td_times_dx2"] = closed.td * dx * dx;
  o.summary["regime"] = regime_json(report);
  o.summary["warnings"] = warnings_json(w);
  return o;
}

Outcome run_sieve(const ScenarioConfig& c) {
  const auto k = PhysicalConstants::codata();
  Outcome o;
  Warnings w;
  const CoefficientSet cs = coefficients(c, w);
  o.coefficients = cs;
  const Scaling s = oscillator_scaling(c.mirror, cs, k);
  const GaussianModel m = gaussian_model(scale_model(c.mirror, cs, s, k));
  const SieveResult r = sieve_search(m, 1.0);
  Json checks = Json::array();
  for (const auto& tc : r.time_checks) {
    checks.push_back({{"t", tc.t}, {"optimum", tc.optimum_value}, {"competitors", tc.competitors},
                      {"optimum_is_least", tc.optimum_is_least},
                      {"ordering_preserved", tc.ordering_preserved}});
  }
  o.summary["sieve"] = {{"r", r.r},
                        {"theta", r.theta},
                        {"entropy_rate", r.entropy_rate},
                        {"iterations", r.iterations},
                        {"robust", r.robust},
                        {"time_checks", checks},
                        {"units", "oscillator units, hbar = 1, time in 1/omega*"}};
  o.summary["warnings"] = warnings_json(w);
  o.passed = r.r <= 1e-3 && r.robust;
  return o;
}

Outcome run_pair(const ScenarioConfig& c) {
  const auto k = PhysicalConstants::codata();
  const CatSpec& cat = require_cat(c);
  Outcome o;
  Warnings w;
  const CoefficientSet cs = coefficients(c, w);
  o.coefficients = cs;
  const double alpha = cat.alpha_mag(c.mirror, k);
  const TdResult td = td_cat_vacuum(alpha, cs.gamma);
  o.predictions["cat_vacuum"] = td_json(td);
  Json table = Json::array();
  double worst = 0.0;
  for (int i = 0; i < c.samples; ++i) {
    const double t = c.t_max_td * td.td * i / (c.samples - 1);
    const double lin = which_way_overlap(t, alpha, cs.gamma, OverlapMode::Linear);
    const double ex = which_way_overlap(t, alpha, cs.gamma, OverlapMode::Exponentiated);
    const PairProbability pp = pair_probability(t, alpha, cs.gamma);
    const double x = t / td.td;
    worst = std::max(worst, std::abs(lin - ex) - 0.5 * x * x * (1.0 + 1e-12));
    table.push_back({{"t_seconds", t}, {"pair_probability", pp.probability},
                     {"perturbative", pp.perturbative}, {"overlap_linear", lin},
                     {"overlap_exponentiated", ex}});
  }
  o.summary["overlap"] = table;
  o.passed = worst <= 0.0;
  o.summary["linear_within_bound"] = o.passed;
  o.summary["warnings"] = warnings_json(w);
  return o;
}

Outcome run_identities(const ScenarioConfig& c) {
  Outcome o;
  Json checks = Json::array();
  for (const auto& r : run_identity_suite(c.seed, c.draws)) {
    checks.push_back({{"name", r.name}, {"draws", r.draws},
                      {"max_relative_error", r.max_relative_error},
                      {"tolerance", r.tolerance}, {"passed", r.passed}});
    o.passed = o.passed && r.passed;
  }
  o.summary["identities"] = checks;
  return o;
}

// --- grid pipelines --------------------------------------------------------

struct GridSetup {
  ScaledModel model;
  std::optional<Scaling> scaling;  // SI conversion when the model came from SI
};

GridSetup grid_model(const ScenarioConfig& c, Outcome& o) {
  GridSetup g;
  if (c.model) {
    g.model = *c.model;
    o.time_column = "t_nondim";
    return g;
  }
  Warnings w;
  const CoefficientSet cs = coefficients(c, w);
  o.coefficients = cs;
  const Scaling s = cs.omega_star > 0.0 ? oscillator_scaling(c.mirror, cs)
                                        : thermal_scaling(c.mirror, cs);
  g.model = scale_model(c.mirror, cs, s);
  g.scaling = s;
  o.summary["warnings"] = warnings_json(w);
  return g;
}

GridSpec grid_spec(const SolverSettings& s, GridSpec fitted) {
  fitted.nx = s.nx;
  fitted.np = s.np;
  if (s.x_half_width) fitted.x_half_width = *s.x_half_width;
  if (s.p_half_width) fitted.p_half_width = *s.p_half_width;
  return fitted;
}

Json model_json(const ScaledModel& m) {
  return {{"drift", m.drift}, {"spring", m.spring}, {"damping", m.damping}, {"dpp", m.dpp},
          {"d2", m.d2}};
}

// Significant local maxima (above 10% of the largest) of a sampled curve.
std::vector<std::size_t> peaks(const std::vector<double>& f) {
  const double top = *std::max_element(f.begin(), f.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    if (f[i] > f[i - 1] && f[i] >= f[i + 1] && f[i] > 0.1 * top) out.push_back(i);
  }
  return out;
}

Outcome run_wigner_cat(const ScenarioConfig& c) {
  Outcome o;
  const GridSetup setup = grid_model(c, o);
  const ScaledModel& m = setup.model;
  const CatSpec& cat = require_cat(c);
  CatWignerSpec spec;
  if (cat.primary() == CatSpec::Primary::AlphaMagnitude) {
    spec.alpha_mag = cat.primary_value();
  } else if (setup.scaling) {
    spec.alpha_mag = cat.alpha_mag(c.mirror);
  } else {
    throw ConfigError("a nondimensional model needs the cat given by 'alpha'");
  }
  spec.phase = cat.phase();
  spec.orientation = c.orientation;
  spec.lobe_scale = c.lobe_scale;

  const SolverSettings& s = c.solver;
  const GridSpec gs = grid_spec(s, suggest_grid(spec, s.nx, s.margin));
  PhaseSpaceGrid grid = init_cat(spec, gs);
  SolverOptions opts;
  opts.shift = s.shift;
  WignerSolver solver(m, gs, opts);
  const FringeProbe probe(spec, grid);
  const double peak0 = grid.max_value();

  const auto [kx, kp] = spec.fringe_wavevector();
  const double separation = std::hypot(kx, kp);
  const bool oscillatory = m.rotation_frequency() > 0.0;
  const auto unit = PhysicalConstants::custom(1.0, 1.0, 1.0);
  const TdResult predicted = td_from_diffusion(m.dpp, separation, oscillatory, unit);

  const double tscale = setup.scaling ? setup.scaling->time : 1.0;
  std::vector<double> times;
  std::vector<double> vis;
  double min_after = std::numeric_limits<double>::infinity();
  const auto record = [&](const PhaseSpaceGrid& g) {
    const double v = probe.visibility(g);
    GaussianState mom = grid_moments(g);
    if (setup.scaling) mom = to_si(mom, *setup.scaling);
    o.rows.push_back({g.time * tscale, v, grid_purity(g), mom});
    times.push_back(g.time);
    vis.push_back(v);
    if (g.time >= 5.0 * predicted.td * (1.0 - 1e-12)) min_after = std::min(min_after, g.min_value() / peak0);
  };
  record(grid);

  if (s.sample_periods) {
    if (!oscillatory) throw ConfigError("solver.sample_periods needs an oscillating model");
    const double period = 2.0 * pi / m.rotation_frequency();
    const auto n = static_cast<int>(std::floor(s.t_end / period + 1e-9));
    const double h = period / std::ceil(period / s.dt - 1e-9);
    for (int i = 1; i <= n; ++i) {
      solver.evolve(grid, i * period, h);
      record(grid);
    }
  } else {
    const auto n = static_cast<long>(std::ceil(s.t_end / s.dt - 1e-9));
    const double h = s.t_end / static_cast<double>(n);
    for (long i = 1; i <= n; ++i) {
      solver.step(grid, h);
      if (i % s.sample_every == 0 || i == n) record(grid);
    }
  }

  // The t = 0 sample is exact by construction; with period sampling it is
  // part of the whole-period series.
  std::span<const double> ts(times);
  std::span<const double> vs(vis);
  if (!s.sample_periods) {
    ts = ts.subspan(1);
    vs = vs.subspan(1);
  }
  const TdFit fit = measure_td(ts, vs);
  const double tolerance = oscillatory ? 0.15 : 0.10;
  const double rel = std::abs(fit.tau - predicted.td) / predicted.td;
  o.passed = rel <= tolerance;

  const Marginals marg = marginals(grid);
  const bool along_x = c.orientation == CatOrientation::PositionSeparated;
  const std::vector<double>& axis = along_x ? marg.x : marg.p;
  const auto pk = peaks(axis);
  Json peak_pos = Json::array();
  for (auto i : pk) peak_pos.push_back(along_x ? grid.x(i) : grid.p(i));

  o.predictions["diffusion"] = td_json(predicted);
  o.predictions["diffusion"]["td_nondim"] = predicted.td;
  o.predictions["diffusion"]["td_seconds"] = predicted.td * tscale;
  o.summary["model"] = model_json(m);
  o.summary["grid"] = {{"nx", gs.nx}, {"np", gs.np}, {"x_half_width", gs.x_half_width},
                       {"p_half_width", gs.p_half_width}};
  o.summary["separation_ratio"] = spec.separation_ratio();
  o.summary["fit"] = {{"td_nondim", fit.tau}, {"td_seconds", fit.tau * tscale},
                      {"r_squared", fit.r_squared}, {"points", fit.points},
                      {"predicted_td_nondim", predicted.td}, {"relative_error", rel},
                      {"tolerance", tolerance}, {"passed", o.passed}};
  o.summary["positivity"] = {
      {"final_min_w_over_initial_peak", grid.min_value() / peak0},
      {"min_w_over_initial_peak_after_5td",
       std::isfinite(min_after) ? Json(min_after) : Json(nullptr)},
      {"marginal_peaks", peak_pos}};
  o.summary["norm"] = grid.total_mass();
  return o;
}

Outcome run_wigner_gaussian(const ScenarioConfig& c) {
  Outcome o;
  const GridSetup setup = grid_model(c, o);
  if (!c.initial) throw ConfigError("scenario '" + c.scenario + "' needs an 'initial' section");
  const ScaledModel& m = setup.model;
  const GaussianState s0 = *c.initial;
  const SolverSettings& s = c.solver;
  GridSpec fitted;
  fitted.x_half_width = 12.0;
  fitted.p_half_width = 12.0;
  const GridSpec gs = grid_spec(s, fitted);
  PhaseSpaceGrid grid = init_gaussian(s0, gs);
  SolverOptions opts;
  opts.shift = s.shift;
  WignerSolver solver(m, gs, opts);
  const GaussianModel gm = gaussian_model(m);
  const double tscale = setup.scaling ? setup.scaling->time : 1.0;

  double worst = 0.0;
  const auto record = [&](const PhaseSpaceGrid& g) {
    const GaussianState a = grid_moments(g);
    const GaussianState b = propagate_exact(s0, gm, g.time, 1.0);
    const double ms = std::hypot(b.mean_x, b.mean_p);
    const double cs = std::sqrt(b.cov_xx * b.cov_xx + 2.0 * b.cov_xp * b.cov_xp + b.cov_pp * b.cov_pp);
    worst = std::max({worst, std::abs(a.mean_x - b.mean_x) / ms, std::abs(a.mean_p - b.mean_p) / ms,
                      std::abs(a.cov_xx - b.cov_xx) / cs, std::abs(a.cov_xp - b.cov_xp) / cs,
                      std::abs(a.cov_pp - b.cov_pp) / cs});
    o.rows.push_back({g.time * tscale, 1.0, grid_purity(g),
                      setup.scaling ? to_si(a, *setup.scaling) : a});
  };
  record(grid);
  const auto n = static_cast<long>(std::ceil(s.t_end / s.dt - 1e-9));
  const double h = s.t_end / static_cast<double>(n);
  for (long i = 1; i <= n; ++i) {
    solver.step(grid, h);
    if (i % s.sample_every == 0 || i == n) record(grid);
  }
  o.passed = worst <= 1e-3;
  o.summary["model"] = model_json(m);
  o.summary["oracle"] = {{"max_relative_error", worst}, {"tolerance", 1e-3}, {"passed", o.passed},
                         {"final_grid", moments_json(grid_moments(grid))},
                         {"final_exact", moments_json(propagate_exact(s0, gm, grid.time, 1.0))}};
  o.summary["norm"] = grid.total_mass();
  return o;
}

}  // namespace

// --- identities ------------------------------------------------------------

std::vector<IdentityCheck> run_identity_suite(std::uint64_t seed, int draws, double tolerance) {
  if (draws < 1) throw ConfigError("identity draws must be positive");
  const auto k = PhysicalConstants::codata();
  std::mt19937_64 rng(seed);
  const auto log_uniform = [&](double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
  };
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };

  std::vector<IdentityCheck> out(4);
  out[0].name = "amplitude_vs_separation";
  out[1].name = "amplitude_1d_vs_velocity";
  out[2].name = "amplitude_sphere_vs_velocity";
  out[3].name = "high_t_vs_thermal_closed_form";

  for (int i = 0; i < draws; ++i) {
    // Oscillator draws; the velocity must stay well below c.
    MirrorParams p;
    p.mass = log_uniform(1e-24, 1e-3);
    p.omega0 = log_uniform(1e3, 1e12);
    const double alpha = log_uniform(3.0, 30.0);
    if (wavepacket_velocity(p, alpha, k) / k.c >= 0.1) {
      --i;
      continue;
    }
    const double gamma = gamma_vacuum_1d(p, k);
    const double dx = separation_from_alpha(p, alpha, k);
    const double dx0 = position_uncertainty(p, k);
    const double v_over_c = wavepacket_velocity(p, alpha, k) / k.c;
    const double a = td_cat_vacuum(alpha, gamma).td;
    out[0].max_relative_error =
        std::max(out[0].max_relative_error, rel(td_from_separation(dx, dx0, gamma).td, a));
    out[1].max_relative_error =
        std::max(out[1].max_relative_error, rel(td_relative_1d(v_over_c, p.omega0).td, a));

    // Sphere: radius below both the Rayleigh limit and v / omega0.
    MirrorParams q = p;
    q.geometry = Geometry::Sphere3D;
    const double size_cap = std::min(0.1, v_over_c) * k.c / p.omega0;
    q.radius = size_cap * log_uniform(1e-3, 0.5);
    const double gs = gamma_vacuum_sphere(q, k);
    out[2].max_relative_error =
        std::max(out[2].max_relative_error,
                 rel(td_relative_sphere(v_over_c, q.omega0, q.radius, k).td,
                     td_cat_vacuum(alpha, gs).td));

    // Thermal free sphere, radius above the thermal photon wavelength.
    MirrorParams t;
    t.geometry = Geometry::Sphere3D;
    t.temperature = log_uniform(1.0, 1e4);
    t.radius = 10.0 * k.hbar * k.c / (k.k_boltzmann * t.temperature) * log_uniform(1.0, 1e3);
    t.mass = log_uniform(1e-15, 1e3);
    const double sep = log_uniform(1e-12, 1e-3);
    const double gt = gamma_thermal_sphere(t, k);
    const double lambda = thermal_wavelength(t, k);
    out[3].max_relative_error =
        std::max(out[3].max_relative_error,
                 rel(td_high_T(lambda, sep, gt).td,
                     td_thermal_sphere_free(t.temperature, t.radius, sep, t.mass, k).td));
  }
  for (auto& r : out) {
    r.draws = draws;
    r.tolerance = tolerance;
    r.passed = r.max_relative_error <= tolerance;
  }
  return out;
}

// --- run -------------------------------------------------------------------

RunResult run(const ScenarioConfig& c, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  switch (find_scenario(c.scenario).pipeline) {
    case Pipeline::VacuumMirror: o = run_vacuum(c, false); break;
    case Pipeline::VacuumSphere: o = run_vacuum(c, true); break;
    case Pipeline::ThermalFree: o = run_thermal(c); break;
    case Pipeline::Sieve: o = run_sieve(c); break;
    case Pipeline::WignerCat: o = run_wigner_cat(c); break;
    case Pipeline::WignerGaussian: o = run_wigner_gaussian(c); break;
    case Pipeline::Identities: o = run_identities(c); break;
    case Pipeline::PairEmission: o = run_pair(c); break;
  }

  RunResult r;
  r.passed = o.passed;
  r.summary = {{"scenario", c.scenario}, {"passed", o.passed}};
  if (o.coefficients) r.summary["coefficients"] = coefficients_json(*o.coefficients);
  if (!o.predictions.empty()) r.summary["td_routes"] = o.predictions;
  for (const auto& [key, value] : o.summary.items()) r.summary[key] = value;

  const bool want_csv = std::find(c.formats.begin(), c.formats.end(), "csv") != c.formats.end();
  const bool want_json = std::find(c.formats.begin(), c.formats.end(), "json") != c.formats.end();
  if (want_csv && !o.rows.empty()) {
    const fs::path p = out_dir / "timeseries.csv";
    write_atomic(p, csv_text(o.time_column, o.rows));
    r.artifacts.push_back(p);
  }
  if (want_json) {
    const fs::path p = out_dir / "summary.json";
    write_atomic(p, r.summary.dump(2) + "\n");
    r.artifacts.push_back(p);
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json files = Json::array();
  for (const auto& a : r.artifacts) files.push_back(a.filename().string());
  files.push_back("manifest.json");
  r.manifest = {{"schema_version", kConfigSchemaVersion},
                {"version", kVersion},
                {"scenario", c.scenario},
                {"config", c.echo},
                {"coefficients", o.coefficients ? coefficients_json(*o.coefficients) : Json(nullptr)},
                {"td_routes", o.predictions},
                {"time_column", o.time_column},
                {"artifacts", files},
                {"passed", o.passed},
                {"wall_clock_seconds", wall}};
  const fs::path mp = out_dir / "manifest.json";
  write_atomic(mp, r.manifest.dump(2) + "\n");
  r.artifacts.push_back(mp);
  return r;
}

RunResult run_config(const ScenarioConfig& c) {
  const char* env = std::getenv("DCE_OUTPUT_DIR");
  const fs::path dir = env != nullptr && *env != '\0' ? fs::path(env) : c.output_dir;
  return run(c, dir.empty() ? fs::path("runs") / c.scenario : dir);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const RegimeViolation*>(&e) != nullptr) return 3;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 1;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const UnknownScenario*>(&e) != nullptr ||
      dynamic_cast<const NonPhysicalInput*>(&e) != nullptr ||
      dynamic_cast<const DomainError*>(&e) != nullptr ||
      dynamic_cast<const GridTooSmall*>(&e) != nullptr) {
    return 2;
  }
  if (dynamic_cast<const Error*>(&e) != nullptr) return 4;
  return 1;
}

}  // namespace dce
