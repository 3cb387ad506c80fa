#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dce/errors.hpp"

namespace dce {

/// Fundamental constants in SI units. The CODATA 2018 values are the default;
/// `custom` exists so that tests can run in natural units (hbar = c = 1).
struct PhysicalConstants {
  double hbar;         // J s
  double c;            // m / s
  double k_boltzmann;  // J / K

  static constexpr PhysicalConstants codata() {
    return {1.054571817e-34, 299792458.0, 1.380649e-23};
  }
  static PhysicalConstants custom(double hbar, double c, double k_boltzmann);
};

enum class Geometry { Mirror1D, Sphere3D };

const char* to_string(Geometry g);
Geometry geometry_from_string(const std::string& name);

/// The physical scene: a particle of mass M bound at frequency omega0 and
/// coupled by radiation pressure to a field at temperature T.
struct MirrorParams {
  double mass = 0.0;         // kg
  double omega0 = 0.0;       // rad / s
  double radius = 0.0;       // m, ignored for Mirror1D
  Geometry geometry = Geometry::Mirror1D;
  double temperature = 0.0;  // K
  double delta_omega = 0.0;  // rad / s, field-induced frequency shift

  double omega_star() const { return omega0 + delta_omega; }
};

/// Cat-state amplitude, specified either by |alpha| or by the separation of
/// the two wavepackets. The other quantity is derived on demand.
class CatSpec {
 public:
  enum class Primary { AlphaMagnitude, Separation };

  static CatSpec from_alpha(double alpha_mag, double phase = 0.0);
  static CatSpec from_separation(double delta_x, double phase = 0.0);

  Primary primary() const { return primary_; }
  double phase() const { return phase_; }
  double primary_value() const { return value_; }

  /// Requires omega0 > 0 when the separation is primary.
  double alpha_mag(const MirrorParams& p,
                   const PhysicalConstants& k = PhysicalConstants::codata()) const;
  /// Requires omega0 > 0 when |alpha| is primary.
  double delta_x(const MirrorParams& p,
                 const PhysicalConstants& k = PhysicalConstants::codata()) const;

 private:
  CatSpec(Primary primary, double value, double phase)
      : primary_(primary), value_(value), phase_(phase) {}

  Primary primary_;
  double value_;
  double phase_;
};

// Kinematic scales. Each throws DomainError when the scale is undefined.

/// Ground-state position spread sqrt(hbar / (2 M omega0)).
double position_uncertainty(const MirrorParams& p,
                            const PhysicalConstants& k = PhysicalConstants::codata());
/// Velocity at the bottom of the well, sqrt(2 hbar omega0 / M) |alpha|.
double wavepacket_velocity(const MirrorParams& p, double alpha_mag,
                           const PhysicalConstants& k = PhysicalConstants::codata());
/// Thermal de Broglie wavelength hbar / sqrt(2 M k T).
double thermal_wavelength(const MirrorParams& p,
                          const PhysicalConstants& k = PhysicalConstants::codata());
/// Delta x = 2 sqrt(2 hbar / (M omega0)) |alpha|.
double separation_from_alpha(const MirrorParams& p, double alpha_mag,
                             const PhysicalConstants& k = PhysicalConstants::codata());
double alpha_from_separation(const MirrorParams& p, double delta_x,
                             const PhysicalConstants& k = PhysicalConstants::codata());

struct DerivedQuantities {
  std::optional<double> delta_x0;   // m, needs omega0 > 0
  std::optional<double> velocity;   // m/s, needs omega0 > 0
  std::optional<double> lambda_t;   // m, needs T > 0
  std::optional<double> alpha_mag;  // filled when derivable
  std::optional<double> delta_x;    // m, filled when derivable
};

/// Every kinematic quantity that is defined for this scene. Quantities whose
/// defining scale vanishes are left empty; use the single-quantity functions
/// above to get a DomainError instead.
DerivedQuantities derived_quantities(const MirrorParams& p, const CatSpec& cat,
                                     const PhysicalConstants& k = PhysicalConstants::codata());

struct ValidationOptions {
  double nonrelativistic_ratio = 1e-3;  // hbar omega0 / (M c^2) upper bound
  double min_alpha = 3.0;               // |alpha| >> 1 gate
  double warn_alpha = 10.0;
  double max_size_parameter = 0.1;      // omega0 R / c, Rayleigh regime
  double max_velocity_ratio = 0.1;      // v / c
};

struct RegimeCheck {
  std::string name;
  double value;
  double threshold;
  bool passed;
};

struct ValidationReport {
  std::vector<RegimeCheck> checks;
  Warnings warnings;
  bool free_particle = false;

  bool all_passed() const;
  const RegimeCheck* find(const std::string& name) const;
};

/// Evaluates every regime condition the closed-form results rely on. Only
/// non-physical input throws (NonPhysicalInput); everything else is reported.
ValidationReport validate(const MirrorParams& p, const CatSpec& cat,
                          const PhysicalConstants& k = PhysicalConstants::codata(),
                          const ValidationOptions& opts = {});

/// Throws NonPhysicalInput unless M > 0, omega0 >= 0, T >= 0, R >= 0.
void require_physical(const MirrorParams& p);

}  // namespace dce
