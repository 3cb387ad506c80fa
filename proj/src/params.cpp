#include "dce/params.hpp"

#include <cmath>
#include <sstream>

namespace dce {

PhysicalConstants PhysicalConstants::custom(double hbar, double c, double k_boltzmann) {
  if (!(hbar > 0.0) || !(c > 0.0) || !(k_boltzmann > 0.0)) {
    throw NonPhysicalInput("physical constants must be strictly positive");
  }
  return {hbar, c, k_boltzmann};
}

const char* to_string(Geometry g) {
  switch (g) {
    case Geometry::Mirror1D: return "mirror1d";
    case Geometry::Sphere3D: return "sphere3d";
  }
  return "unknown";
}

Geometry geometry_from_string(const std::string& name) {
  if (name == "mirror1d") return Geometry::Mirror1D;
  if (name == "sphere3d") return Geometry::Sphere3D;
  throw ConfigError("unknown geometry '" + name + "' (expected mirror1d or sphere3d)");
}

CatSpec CatSpec::from_alpha(double alpha_mag, double phase) {
  if (!(alpha_mag >= 0.0)) throw NonPhysicalInput("|alpha| must be non-negative");
  return CatSpec(Primary::AlphaMagnitude, alpha_mag, phase);
}

CatSpec CatSpec::from_separation(double delta_x, double phase) {
  if (!(delta_x >= 0.0)) throw NonPhysicalInput("separation must be non-negative");
  return CatSpec(Primary::Separation, delta_x, phase);
}

double CatSpec::alpha_mag(const MirrorParams& p, const PhysicalConstants& k) const {
  if (primary_ == Primary::AlphaMagnitude) return value_;
  return alpha_from_separation(p, value_, k);
}

double CatSpec::delta_x(const MirrorParams& p, const PhysicalConstants& k) const {
  if (primary_ == Primary::Separation) return value_;
  return separation_from_alpha(p, value_, k);
}

void require_physical(const MirrorParams& p) {
  if (!(p.mass > 0.0)) throw NonPhysicalInput("mass must be positive");
  if (!(p.omega0 >= 0.0)) throw NonPhysicalInput("omega0 must be non-negative");
  if (!(p.temperature >= 0.0)) throw NonPhysicalInput("temperature must be non-negative");
  if (!(p.radius >= 0.0)) throw NonPhysicalInput("radius must be non-negative");
}

namespace {

void require_oscillator(const MirrorParams& p, const char* what) {
  require_physical(p);
  if (p.omega0 == 0.0) {
    throw DomainError(std::string(what) + " is undefined for a free particle (omega0 = 0)");
  }
}

}  // namespace

double position_uncertainty(const MirrorParams& p, const PhysicalConstants& k) {
  require_oscillator(p, "position uncertainty");
  return std::sqrt(k.hbar / (2.0 * p.mass * p.omega0));
}

double wavepacket_velocity(const MirrorParams& p, double alpha_mag, const PhysicalConstants& k) {
  require_oscillator(p, "wavepacket velocity");
  return std::sqrt(2.0 * k.hbar * p.omega0 / p.mass) * alpha_mag;
}

double thermal_wavelength(const MirrorParams& p, const PhysicalConstants& k) {
  require_physical(p);
  if (p.temperature == 0.0) throw DomainError("thermal wavelength needs T > 0");
  return k.hbar / std::sqrt(2.0 * p.mass * k.k_boltzmann * p.temperature);
}

double separation_from_alpha(const MirrorParams& p, double alpha_mag, const PhysicalConstants& k) {
  require_oscillator(p, "separation");
  return 2.0 * std::sqrt(2.0 * k.hbar / (p.mass * p.omega0)) * alpha_mag;
}

double alpha_from_separation(const MirrorParams& p, double delta_x, const PhysicalConstants& k) {
  require_oscillator(p, "|alpha|");
  return delta_x / (2.0 * std::sqrt(2.0 * k.hbar / (p.mass * p.omega0)));
}

DerivedQuantities derived_quantities(const MirrorParams& p, const CatSpec& cat,
                                     const PhysicalConstants& k) {
  require_physical(p);
  DerivedQuantities d;
  if (p.omega0 > 0.0) {
    d.delta_x0 = position_uncertainty(p, k);
    d.alpha_mag = cat.alpha_mag(p, k);
    d.delta_x = cat.delta_x(p, k);
    d.velocity = wavepacket_velocity(p, *d.alpha_mag, k);
  } else if (cat.primary() == CatSpec::Primary::Separation) {
    d.delta_x = cat.primary_value();
  } else {
    d.alpha_mag = cat.primary_value();
  }
  if (p.temperature > 0.0) d.lambda_t = thermal_wavelength(p, k);
  return d;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

const RegimeCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate(const MirrorParams& p, const CatSpec& cat, const PhysicalConstants& k,
                          const ValidationOptions& opts) {
  require_physical(p);
  if (!(cat.primary_value() >= 0.0)) throw NonPhysicalInput("cat amplitude must be non-negative");

  ValidationReport r;
  r.free_particle = (p.omega0 == 0.0);

  const double rel = k.hbar * p.omega0 / (p.mass * k.c * k.c);
  r.checks.push_back({"nonrelativistic", rel, opts.nonrelativistic_ratio,
                      rel <= opts.nonrelativistic_ratio});

  if (r.free_particle) {
    warn(&r.warnings, "free_particle",
         "omega0 = 0: vacuum damping vanishes, only thermal formulas apply");
    return r;
  }

  const double alpha = cat.alpha_mag(p, k);
  r.checks.push_back({"large_amplitude", alpha, opts.min_alpha, alpha >= opts.min_alpha});
  if (alpha >= opts.min_alpha && alpha < opts.warn_alpha) {
    std::ostringstream msg;
    msg << "|alpha| = " << alpha << " is only marginally >> 1";
    warn(&r.warnings, "marginal_amplitude", msg.str());
  }

  const double v_over_c = wavepacket_velocity(p, alpha, k) / k.c;
  r.checks.push_back({"slow_wavepackets", v_over_c, opts.max_velocity_ratio,
                      v_over_c < opts.max_velocity_ratio});

  if (p.geometry == Geometry::Sphere3D) {
    const double size = p.omega0 * p.radius / k.c;
    r.checks.push_back({"rayleigh_regime", size, opts.max_size_parameter,
                        size <= opts.max_size_parameter});
    r.checks.push_back({"size_below_velocity", size, v_over_c, size < v_over_c});
  }
  return r;
}

}  // namespace dce
