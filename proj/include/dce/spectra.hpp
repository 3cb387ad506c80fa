#pragma once

#include <array>
#include <complex>
#include <functional>

#include "dce/errors.hpp"
#include "dce/params.hpp"

namespace dce {

/// Coefficients of the phase-space master equation.
struct CoefficientSet {
  double gamma = 0.0;       // 1/s, amplitude damping rate
  double d1 = 0.0;          // (kg m/s)^2 / s, momentum diffusion
  double d2 = 0.0;          // kg m^2 / s^2, cross diffusion
  double omega_star = 0.0;  // rad / s, shifted oscillation frequency
};

/// Vacuum damping rate of a perfect 1D mirror, hbar omega0^2 / (12 pi M c^2).
double gamma_vacuum_1d(const MirrorParams& p,
                       const PhysicalConstants& k = PhysicalConstants::codata());

/// Vacuum damping rate of a small perfectly reflecting sphere. The Rayleigh
/// suppression (omega0 R / c)^6 / 108 relative to the 1D mirror; throws
/// RegimeViolation above `max_size_parameter`.
double gamma_vacuum_sphere(const MirrorParams& p,
                           const PhysicalConstants& k = PhysicalConstants::codata(),
                           double max_size_parameter = 0.1);

/// Blackbody friction on a sphere much larger than the thermal wavelength
/// hbar c / (k T): Gamma = (4 pi^3 / 45) (kT)^4 R^2 / (hbar^3 c^4 M).
double gamma_thermal_sphere(const MirrorParams& p,
                            const PhysicalConstants& k = PhysicalConstants::codata(),
                            Warnings* warnings = nullptr);

/// Static Casimir attraction between parallel perfect plates (magnitude).
double casimir_force_plates(double area, double separation,
                            const PhysicalConstants& k = PhysicalConstants::codata());

struct SpectrumModel {
  enum class Kind { Vacuum1D };
  Kind kind = Kind::Vacuum1D;
  double cutoff_omega = 0.0;  // rad / s
};

/// Vacuum 1D model with cutoff = factor * omega0.
SpectrumModel vacuum_spectrum(double omega0, double cutoff_factor = 100.0);

/// Symmetrized force spectrum hbar^2 w^3 / (3 pi c^2) exp(-w / w_c), zero for
/// w <= 0.
double force_spectrum_vacuum_1d(double omega, const SpectrumModel& model,
                                const PhysicalConstants& k = PhysicalConstants::codata());

/// Long-time momentum diffusion M Gamma hbar omega0 coth(hbar omega0 / 2kT).
/// Reduces to hbar M omega0 Gamma at T = 0 and 2 M k T Gamma for a free
/// particle.
double diffusion_asymptotic(const MirrorParams& p, double gamma,
                            const PhysicalConstants& k = PhysicalConstants::codata());

struct QuadratureOptions {
  double rel_tol = 1e-6;
  std::size_t max_intervals = 20000;
};

/// D1(t) = 1/2 int dw/2pi S(w) sin((w - w0) t) / (w - w0) over w in
/// [0, omega_max]; omega_max may be +infinity. Throws QuadratureFailure when
/// the requested relative tolerance is not reached.
double diffusion_finite_time(double t, double omega0, const std::function<double(double)>& spectrum,
                             double omega_max, const QuadratureOptions& opts = {});

/// Zero-temperature vacuum 1D diffusion at finite time.
double diffusion_finite_time(double t, double omega0, const SpectrumModel& model,
                             const PhysicalConstants& k = PhysicalConstants::codata(),
                             const QuadratureOptions& opts = {});

/// Roots of eps s^3 - s^2 - omega0^2 = 0, eps = hbar / (6 pi M c^2), the
/// characteristic equation of the radiation-reaction equation of motion.
struct CharacteristicRoots {
  std::complex<double> damped_plus;   // ~ -Gamma + i omega0
  std::complex<double> damped_minus;  // conjugate of damped_plus
  double runaway = 0.0;               // ~ 6 pi M c^2 / hbar
  double epsilon = 0.0;               // hbar / (6 pi M c^2)

  std::array<std::complex<double>, 3> all() const {
    return {damped_plus, damped_minus, std::complex<double>(runaway, 0.0)};
  }
};

CharacteristicRoots characteristic_roots(const MirrorParams& p,
                                         const PhysicalConstants& k = PhysicalConstants::codata());

/// Gamma, D1 and omega* for the regime selected by geometry and temperature:
/// vacuum 1D or sphere at T = 0, blackbody sphere at T > 0 (free particle or
/// kT >> hbar omega0). Intermediate temperatures throw RegimeViolation.
CoefficientSet coefficients_for(const MirrorParams& p,
                                const PhysicalConstants& k = PhysicalConstants::codata(),
                                Warnings* warnings = nullptr);

}  // namespace dce
