#include "dce/spectra.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace dce {

using std::numbers::pi;

double gamma_vacuum_1d(const MirrorParams& p, const PhysicalConstants& k) {
  require_physical(p);
  return k.hbar * p.omega0 * p.omega0 / (12.0 * pi * p.mass * k.c * k.c);
}

double gamma_vacuum_sphere(const MirrorParams& p, const PhysicalConstants& k,
                           double max_size_parameter) {
  require_physical(p);
  const double size = p.omega0 * p.radius / k.c;
  if (size > max_size_parameter) {
    std::ostringstream msg;
    msg << "sphere outside Rayleigh regime: omega0 R / c = " << size << " > "
        << max_size_parameter;
    throw RegimeViolation(msg.str());
  }
  const double s3 = size * size * size;
  return k.hbar * p.omega0 * p.omega0 * (s3 * s3) / (1296.0 * pi * p.mass * k.c * k.c);
}

double gamma_thermal_sphere(const MirrorParams& p, const PhysicalConstants& k,
                            Warnings* warnings) {
  require_physical(p);
  if (p.temperature == 0.0) throw DomainError("thermal friction needs T > 0");
  const double kt = k.k_boltzmann * p.temperature;
  const double thermal_length = k.hbar * k.c / kt;
  if (p.radius < 10.0 * thermal_length) {
    std::ostringstream msg;
    msg << "tangent-plane approximation needs R >> hbar c / kT; R / (hbar c / kT) = "
        << p.radius / thermal_length;
    warn(warnings, "short_wavelength_regime", msg.str());
  }
  const double kt2 = kt * kt;
  const double c2 = k.c * k.c;
  return (4.0 * pi * pi * pi / 45.0) * kt2 * kt2 * p.radius * p.radius /
         (k.hbar * k.hbar * k.hbar * c2 * c2 * p.mass);
}

double casimir_force_plates(double area, double separation, const PhysicalConstants& k) {
  if (!(area > 0.0) || !(separation > 0.0)) {
    throw DomainError("plate area and separation must be positive");
  }
  const double l2 = separation * separation;
  return (pi * pi / 240.0) * k.hbar * k.c / (l2 * l2) * area;
}

SpectrumModel vacuum_spectrum(double omega0, double cutoff_factor) {
  if (!(omega0 > 0.0)) throw DomainError("vacuum spectrum needs omega0 > 0");
  return {SpectrumModel::Kind::Vacuum1D, cutoff_factor * omega0};
}

double force_spectrum_vacuum_1d(double omega, const SpectrumModel& model,
                                const PhysicalConstants& k) {
  if (omega <= 0.0) return 0.0;
  const double law = k.hbar * k.hbar * omega * omega * omega / (3.0 * pi * k.c * k.c);
  if (model.cutoff_omega <= 0.0) return law;
  return law * std::exp(-omega / model.cutoff_omega);
}

double diffusion_asymptotic(const MirrorParams& p, double gamma, const PhysicalConstants& k) {
  require_physical(p);
  if (p.omega0 == 0.0) {
    if (p.temperature == 0.0) {
      throw DomainError("diffusion undefined for a free particle in vacuum");
    }
    return 2.0 * p.mass * k.k_boltzmann * p.temperature * gamma;
  }
  const double quantum = p.mass * gamma * k.hbar * p.omega0;
  if (p.temperature == 0.0) return quantum;
  const double x = k.hbar * p.omega0 / (2.0 * k.k_boltzmann * p.temperature);
  // coth(x); tanh underflows gracefully for large x.
  return quantum / std::tanh(x);
}

// --- finite-time diffusion -------------------------------------------------

namespace {

void disable_gsl_abort() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct WorkspaceDeleter {
  void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};
struct QawoDeleter {
  void operator()(gsl_integration_qawo_table* t) const { gsl_integration_qawo_table_free(t); }
};
using Workspace = std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter>;
using QawoTable = std::unique_ptr<gsl_integration_qawo_table, QawoDeleter>;

// Spectrum on the scaled axis xi = w / w0, divided by a reference level so
// that the integrand is O(1).
struct ScaledIntegrand {
  const std::function<double(double)>* spectrum;
  double omega0;
  double scale;
  double tau;  // omega0 * t

  double s(double xi) const { return (*spectrum)(omega0 * xi) / scale; }
};

double near_integrand(double xi, void* raw) {
  const auto& f = *static_cast<const ScaledIntegrand*>(raw);
  const double u = xi - 1.0;
  const double z = u * f.tau;
  const double kernel = std::abs(z) < 1e-6 ? f.tau * (1.0 - z * z / 6.0) : std::sin(z) / u;
  return f.s(xi) * kernel;
}

// Tail after substituting u = xi - 1; the sin(tau u) weight is supplied by
// the oscillatory rule.
double tail_integrand(double u, void* raw) {
  const auto& f = *static_cast<const ScaledIntegrand*>(raw);
  return f.s(1.0 + u) / u;
}

double slow_tail_integrand(double u, void* raw) {
  const auto& f = *static_cast<const ScaledIntegrand*>(raw);
  return f.s(1.0 + u) * std::sin(f.tau * u) / u;
}

// omega0 t below which the tail is integrated without an oscillatory weight.
constexpr double kSlowKernel = 1e-3;

void check_status(int status, const char* region) {
  if (status != GSL_SUCCESS) {
    std::ostringstream msg;
    msg << "D1(t) quadrature failed on the " << region << " region: " << gsl_strerror(status);
    throw QuadratureFailure(msg.str());
  }
}

}  // namespace

double diffusion_finite_time(double t, double omega0, const std::function<double(double)>& spectrum,
                             double omega_max, const QuadratureOptions& opts) {
  if (!(t > 0.0)) throw DomainError("finite-time diffusion needs t > 0");
  if (!(omega0 > 0.0)) throw DomainError("finite-time diffusion needs omega0 > 0");
  if (!(omega_max > 0.0)) throw DomainError("upper frequency must be positive");
  disable_gsl_abort();

  const double ref = std::abs(spectrum(omega0));
  ScaledIntegrand f{&spectrum, omega0, ref > 0.0 ? ref : 1.0, omega0 * t};
  const double xi_max = omega_max / omega0;
  const double near_end = std::min(2.0, xi_max);

  Workspace ws(gsl_integration_workspace_alloc(opts.max_intervals));
  gsl_function near{&near_integrand, &f};
  double near_val = 0.0;
  double near_err = 0.0;
  check_status(gsl_integration_qag(&near, 0.0, near_end, 0.0, opts.rel_tol, opts.max_intervals,
                                   GSL_INTEG_GAUSS61, ws.get(), &near_val, &near_err),
               "central");

  double tail_val = 0.0;
  double tail_err = 0.0;
  if (xi_max > 2.0) {
    gsl_function tail{&tail_integrand, &f};
    // The oscillatory rules only take an absolute tolerance.
    const double abs_tol = std::max(opts.rel_tol * std::abs(near_val), 1e-300);
    if (f.tau < kSlowKernel) {
      // The kernel barely turns over the spectrum's support; the cycle-based
      // rules lose accuracy there, a plain adaptive rule does not.
      gsl_function slow{&slow_tail_integrand, &f};
      const int status =
          std::isinf(xi_max)
              ? gsl_integration_qagiu(&slow, 1.0, abs_tol, opts.rel_tol, opts.max_intervals,
                                      ws.get(), &tail_val, &tail_err)
              : gsl_integration_qag(&slow, 1.0, xi_max - 1.0, abs_tol, opts.rel_tol,
                                    opts.max_intervals, GSL_INTEG_GAUSS61, ws.get(), &tail_val,
                                    &tail_err);
      check_status(status, "tail");
    } else if (std::isinf(xi_max)) {
      Workspace cycles(gsl_integration_workspace_alloc(opts.max_intervals));
      QawoTable table(gsl_integration_qawo_table_alloc(f.tau, 1.0, GSL_INTEG_SINE, 50));
      check_status(gsl_integration_qawf(&tail, 1.0, abs_tol, opts.max_intervals, ws.get(),
                                        cycles.get(), table.get(), &tail_val, &tail_err),
                   "tail");
    } else {
      QawoTable table(
          gsl_integration_qawo_table_alloc(f.tau, xi_max - 2.0, GSL_INTEG_SINE, 50));
      check_status(gsl_integration_qawo(&tail, 1.0, abs_tol, opts.rel_tol, opts.max_intervals,
                                        ws.get(), table.get(), &tail_val, &tail_err),
                   "tail");
    }
  }

  const double integral = near_val + tail_val;
  const double err = near_err + tail_err;
  if (err > opts.rel_tol * std::abs(integral) * 10.0 && err > 0.0) {
    std::ostringstream msg;
    msg << "D1(t) quadrature error estimate " << err << " exceeds tolerance for value "
        << integral;
    throw QuadratureFailure(msg.str());
  }
  return f.scale * integral / (4.0 * pi);
}

double diffusion_finite_time(double t, double omega0, const SpectrumModel& model,
                             const PhysicalConstants& k, const QuadratureOptions& opts) {
  const std::function<double(double)> s = [&](double w) {
    return force_spectrum_vacuum_1d(w, model, k);
  };
  return diffusion_finite_time(t, omega0, s, std::numeric_limits<double>::infinity(), opts);
}

// --- radiation-reaction roots ----------------------------------------------

CharacteristicRoots characteristic_roots(const MirrorParams& p, const PhysicalConstants& k) {
  require_physical(p);
  const double eps = k.hbar / (6.0 * pi * p.mass * k.c * k.c);
  const double w2 = p.omega0 * p.omega0;
  CharacteristicRoots out;
  out.epsilon = eps;

  // Real root r > 1/eps of eps r^3 - r^2 - w0^2. Safeguarded Newton inside a
  // bracket [lo, hi] with p(lo) < 0 < p(hi).
  const auto poly = [&](double r) { return r * r * (eps * r - 1.0) - w2; };
  double lo = 1.0 / eps;
  double hi = lo + p.omega0 + 1.0 / eps * 1e-12;
  for (int i = 0; poly(hi) <= 0.0; ++i) {
    hi = lo + 2.0 * (hi - lo);
    if (i > 2000) throw RootFindingFailure("could not bracket the runaway root");
  }
  double r = hi;
  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    const double f = poly(r);
    const double scale = eps * r * r * r + r * r + w2;
    if (std::abs(f) <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
      converged = true;
      break;
    }
    if (f > 0.0) hi = r; else lo = r;
    const double df = 3.0 * eps * r * r - 2.0 * r;
    double next = r - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == r) {
      converged = true;
      break;
    }
    r = next;
  }
  if (!converged) throw RootFindingFailure("runaway root did not converge");
  out.runaway = r;

  // Deflate: eps (s - r)(s^2 + b s + c) with b = w0^2 / (eps r^2) and
  // c = w0^2 / (eps r). Both are formed without cancellation.
  const double b = w2 / (eps * r * r);
  const double c = w2 / (eps * r);
  const std::complex<double> disc(c - 0.25 * b * b, 0.0);
  const std::complex<double> root = std::sqrt(disc);
  // For an overdamped pair sqrt(disc) is real; keep the larger root first.
  out.damped_plus = std::complex<double>(-0.5 * b, 0.0) + std::complex<double>(0.0, 1.0) * root;
  out.damped_minus = std::complex<double>(-0.5 * b, 0.0) - std::complex<double>(0.0, 1.0) * root;
  if (c - 0.25 * b * b < 0.0) {
    const double q = std::sqrt(0.25 * b * b - c);
    out.damped_plus = {-0.5 * b + q, 0.0};
    out.damped_minus = {-0.5 * b - q, 0.0};
  }
  return out;
}

CoefficientSet coefficients_for(const MirrorParams& p, const PhysicalConstants& k,
                                Warnings* warnings) {
  require_physical(p);
  CoefficientSet cs;
  cs.omega_star = p.omega_star();
  if (p.temperature == 0.0) {
    cs.gamma = p.geometry == Geometry::Mirror1D ? gamma_vacuum_1d(p, k)
                                                : gamma_vacuum_sphere(p, k);
    if (p.omega0 > 0.0) cs.d1 = diffusion_asymptotic(p, cs.gamma, k);
    return cs;
  }
  if (p.geometry != Geometry::Sphere3D) {
    throw RegimeViolation("no thermal damping law is available for the 1D mirror at T > 0");
  }
  const double kt = k.k_boltzmann * p.temperature;
  if (p.omega0 > 0.0 && kt < 10.0 * k.hbar * p.omega0) {
    throw RegimeViolation(
        "damping between the vacuum and high-temperature regimes is not modelled "
        "(needs kT >= 10 hbar omega0)");
  }
  cs.gamma = gamma_thermal_sphere(p, k, warnings);
  cs.d1 = diffusion_asymptotic(p, cs.gamma, k);
  return cs;
}

}  // namespace dce
