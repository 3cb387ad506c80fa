#include "dce/decoherence.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dce {

using std::numbers::pi;

const char* to_string(TdRegime r) {
  switch (r) {
    case TdRegime::VacuumCat1D: return "vacuum_cat_1d";
    case TdRegime::VacuumCatSphere: return "vacuum_cat_sphere";
    case TdRegime::HighTOscillator: return "high_t_oscillator";
    case TdRegime::HighTFree: return "high_t_free";
    case TdRegime::GenericDiffusion: return "generic_diffusion";
  }
  return "unknown";
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw DomainError(std::string(name) + " must be positive");
}

void check_alpha(double alpha, const TdOptions& opts, Warnings& w) {
  if (alpha < opts.min_alpha) {
    std::ostringstream msg;
    msg << "|alpha| = " << alpha << " below " << opts.min_alpha
        << "; the closed form assumes |alpha| >> 1";
    warn(&w, "small_amplitude", msg.str());
  } else if (alpha < opts.warn_alpha) {
    warn(&w, "marginal_amplitude", "|alpha| is only marginally >> 1");
  }
}

}  // namespace

TdResult td_cat_vacuum(double alpha_mag, double gamma, const TdOptions& opts) {
  require_positive(gamma, "gamma");
  require_positive(alpha_mag, "|alpha|");
  TdResult r;
  r.td = 1.0 / (4.0 * alpha_mag * alpha_mag * gamma);
  r.regime = TdRegime::VacuumCat1D;
  r.averaging_factor = 2;
  r.inputs = {{"alpha_mag", alpha_mag}, {"gamma", gamma}};
  check_alpha(alpha_mag, opts, r.warnings);
  return r;
}

TdResult td_from_separation(double delta_x, double delta_x0, double gamma) {
  require_positive(delta_x, "delta_x");
  require_positive(delta_x0, "delta_x0");
  require_positive(gamma, "gamma");
  TdResult r;
  const double ratio = delta_x0 / delta_x;
  r.td = 4.0 * ratio * ratio / gamma;
  r.regime = TdRegime::VacuumCat1D;
  r.averaging_factor = 2;
  r.inputs = {{"delta_x", delta_x}, {"delta_x0", delta_x0}, {"gamma", gamma}};
  return r;
}

TdResult td_relative_1d(double v_over_c, double omega0, const TdOptions& opts) {
  require_positive(v_over_c, "v/c");
  require_positive(omega0, "omega0");
  if (v_over_c >= opts.max_velocity_ratio) {
    throw RegimeViolation("v/c must be << 1");
  }
  TdResult r;
  r.td = 3.0 / (v_over_c * v_over_c) * (2.0 * pi / omega0);
  r.regime = TdRegime::VacuumCat1D;
  r.averaging_factor = 2;
  r.inputs = {{"v_over_c", v_over_c}, {"omega0", omega0}};
  return r;
}

TdResult td_relative_sphere(double v_over_c, double omega0, double radius,
                            const PhysicalConstants& k, const TdOptions& opts) {
  require_positive(v_over_c, "v/c");
  require_positive(omega0, "omega0");
  require_positive(radius, "radius");
  const double size = omega0 * radius / k.c;
  if (!(size < v_over_c)) {
    std::ostringstream msg;
    msg << "needs omega0 R / c < v / c, got " << size << " >= " << v_over_c;
    throw RegimeViolation(msg.str());
  }
  if (v_over_c >= opts.max_velocity_ratio) throw RegimeViolation("v/c must be << 1");
  const double inv = 1.0 / size;
  const double inv3 = inv * inv * inv;
  TdResult r;
  r.td = 324.0 / (v_over_c * v_over_c) * (inv3 * inv3) * (2.0 * pi / omega0);
  r.regime = TdRegime::VacuumCatSphere;
  r.averaging_factor = 2;
  r.inputs = {{"v_over_c", v_over_c}, {"omega0", omega0}, {"radius", radius}};
  return r;
}

TdResult td_from_diffusion(double d1, double delta_x, bool oscillatory,
                           const PhysicalConstants& k) {
  require_positive(d1, "D1");
  require_positive(delta_x, "delta_x");
  TdResult r;
  r.averaging_factor = oscillatory ? 2 : 1;
  r.td = r.averaging_factor * k.hbar * k.hbar / (d1 * delta_x * delta_x);
  r.regime = TdRegime::GenericDiffusion;
  r.inputs = {{"d1", d1}, {"delta_x", delta_x}, {"oscillatory", oscillatory ? 1.0 : 0.0}};
  return r;
}

TdResult td_high_T(double lambda_t, double delta_x, double gamma,
                   std::optional<double> temperature, const PhysicalConstants& k) {
  require_positive(lambda_t, "lambda_T");
  require_positive(delta_x, "delta_x");
  require_positive(gamma, "gamma");
  TdResult r;
  const double ratio = lambda_t / delta_x;
  r.td = ratio * ratio / gamma;
  r.regime = TdRegime::HighTFree;
  r.inputs = {{"lambda_t", lambda_t}, {"delta_x", delta_x}, {"gamma", gamma}};
  if (temperature) {
    require_positive(*temperature, "temperature");
    r.inputs["temperature"] = *temperature;
    const double thermal_time = k.hbar / (k.k_boltzmann * *temperature);
    if (r.td < 10.0 * thermal_time) {
      std::ostringstream msg;
      msg << "t_d = " << r.td << " s is not >> hbar/kT = " << thermal_time << " s";
      warn(&r.warnings, "thermal_memory", msg.str());
    }
  }
  return r;
}

TdResult td_thermal_sphere_free(double temperature, double radius, double delta_x, double mass,
                                const PhysicalConstants& k) {
  require_positive(temperature, "temperature");
  require_positive(radius, "radius");
  require_positive(delta_x, "delta_x");
  require_positive(mass, "mass");
  const double kt = k.k_boltzmann * temperature;
  const double h2 = k.hbar * k.hbar;
  const double c2 = k.c * k.c;
  TdResult r;
  r.td = 45.0 / (8.0 * pi * pi * pi) * (h2 * h2 * k.hbar) * (c2 * c2) /
         (kt * kt * kt * kt * kt * radius * radius * delta_x * delta_x);
  r.regime = TdRegime::HighTFree;
  r.inputs = {{"temperature", temperature}, {"radius", radius}, {"delta_x", delta_x},
              {"mass", mass}};
  return r;
}

}  // namespace dce
