#pragma once

#include <map>
#include <optional>
#include <string>

#include "dce/errors.hpp"
#include "dce/params.hpp"

namespace dce {

enum class TdRegime { VacuumCat1D, VacuumCatSphere, HighTOscillator, HighTFree, GenericDiffusion };

const char* to_string(TdRegime r);

struct TdResult {
  double td = 0.0;  // s
  TdRegime regime = TdRegime::GenericDiffusion;
  int averaging_factor = 1;  // 2 iff rotation averaging was applied
  std::map<std::string, double> inputs;
  Warnings warnings;
};

struct TdOptions {
  double min_alpha = 3.0;
  double warn_alpha = 10.0;
  double max_velocity_ratio = 0.1;
};

/// 1 / (4 |alpha|^2 Gamma): cat-state decoherence from pair emission.
TdResult td_cat_vacuum(double alpha_mag, double gamma, const TdOptions& opts = {});

/// 4 (dx0 / dx)^2 / Gamma, the same result phrased through the separation.
TdResult td_from_separation(double delta_x, double delta_x0, double gamma);

/// 3 (c/v)^2 (2 pi / omega0) for the 1D mirror.
TdResult td_relative_1d(double v_over_c, double omega0, const TdOptions& opts = {});

/// 324 (c/v)^2 (c / omega0 R)^6 (2 pi / omega0) for a Rayleigh sphere.
/// Requires omega0 R / c < v / c.
TdResult td_relative_sphere(double v_over_c, double omega0, double radius,
                            const PhysicalConstants& k = PhysicalConstants::codata(),
                            const TdOptions& opts = {});

/// hbar^2 / (D1 dx^2), doubled when `oscillatory` is set to account for the
/// average over many free rotations in phase space.
TdResult td_from_diffusion(double d1, double delta_x, bool oscillatory,
                           const PhysicalConstants& k = PhysicalConstants::codata());

/// (lambda_T / dx)^2 / Gamma. When `temperature` is given, warns if the
/// result is not >> hbar / kT (the Einstein value of D1 is then premature).
TdResult td_high_T(double lambda_t, double delta_x, double gamma,
                   std::optional<double> temperature = std::nullopt,
                   const PhysicalConstants& k = PhysicalConstants::codata());

/// (45 / 8 pi^3) hbar^5 c^4 / ((kT)^5 R^2 dx^2) for a free sphere in a
/// blackbody field. The mass cancels; it is only echoed.
TdResult td_thermal_sphere_free(double temperature, double radius, double delta_x, double mass,
                                const PhysicalConstants& k = PhysicalConstants::codata());

}  // namespace dce
