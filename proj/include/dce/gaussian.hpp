#pragma once

#include <vector>

#include "dce/errors.hpp"
#include "dce/params.hpp"
#include "dce/spectra.hpp"

namespace dce {

/// Phase-space mean and covariance of a single-mode Gaussian state (SI).
struct GaussianState {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double cov_xx = 0.0;
  double cov_xp = 0.0;
  double cov_pp = 0.0;

  double det() const { return cov_xx * cov_pp - cov_xp * cov_xp; }
  bool positive_definite() const { return cov_xx > 0.0 && cov_pp > 0.0 && det() > 0.0; }
};

struct MomentRates {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double cov_xx = 0.0;
  double cov_xp = 0.0;
  double cov_pp = 0.0;
};

/// Symmetric diffusion tensor of a Fokker-Planck drift-diffusion equation,
/// written as pp d_p^2 + 2 xp d_x d_p + xx d_x^2. The master equation has
/// pp = D1, xp = -D2 / 2 and no position diffusion; the general form is used
/// for test-only models.
struct DiffusionMatrix {
  double pp = 0.0;
  double xp = 0.0;
  double xx = 0.0;
};

struct GaussianModel {
  double mass = 0.0;
  double omega_star = 0.0;
  double gamma = 0.0;
  DiffusionMatrix diffusion;

  static GaussianModel from(const MirrorParams& p, const CoefficientSet& c);
};

/// First and second moments of the phase-space master equation:
///   d<x>/dt  = <p>/M
///   d<p>/dt  = -M w*^2 <x> - 2 Gamma <p>
///   dVxx/dt  = 2 Vxp / M + 2 Dxx
///   dVxp/dt  = Vpp / M - M w*^2 Vxx - 2 Gamma Vxp + 2 Dxp
///   dVpp/dt  = -2 M w*^2 Vxp - 4 Gamma Vpp + 2 Dpp
MomentRates moment_derivatives(const GaussianState& s, const GaussianModel& m);
MomentRates moment_derivatives(const GaussianState& s, const MirrorParams& p,
                               const CoefficientSet& c);

/// Fixed-step RK4 over [0, t]. The step is shrunk so that it divides t. Throws
/// StepSizeError when dt exceeds 1% of the fastest scale or the covariance
/// stops being positive definite.
GaussianState evolve(const GaussianState& s, const GaussianModel& m, double t, double dt);

/// Closed-form solution of the linear moment system at time t.
GaussianState propagate_exact(const GaussianState& s, const GaussianModel& m, double t,
                              double hbar = PhysicalConstants::codata().hbar);

/// Steady state of the moment system. Needs Gamma > 0 and w* > 0.
GaussianState steady_state(const GaussianModel& m,
                           double hbar = PhysicalConstants::codata().hbar);

/// Tr rho^2 = hbar / (2 sqrt(det sigma)).
double purity(const GaussianState& s, double hbar = PhysicalConstants::codata().hbar);
double linear_entropy(const GaussianState& s, double hbar = PhysicalConstants::codata().hbar);

/// Pure squeezed state. In oscillator units (x / l, p l / hbar with
/// l^2 = hbar / (M w)) the covariance is R(theta) diag(e^{-2r}, e^{2r}) R(theta)^T / 2.
GaussianState squeezed_state(double mass, double omega, double r, double theta,
                             double hbar = PhysicalConstants::codata().hbar,
                             double mean_x = 0.0, double mean_p = 0.0);
GaussianState coherent_state(double mass, double omega, double mean_x = 0.0, double mean_p = 0.0,
                             double hbar = PhysicalConstants::codata().hbar);

enum class EntropyRateMode {
  /// dS/dt at t = 0+ with the covariance frozen at its initial value.
  Instantaneous,
  /// Same rate averaged over one free rotation at w*; the figure of merit for
  /// weakly damped oscillators.
  PeriodAveraged,
};

/// Linear-entropy production rate of an initially pure state. Throws
/// DomainError if the state is not pure to 1e-9.
double entropy_production_rate(const GaussianState& pure, const GaussianModel& m,
                               double hbar = PhysicalConstants::codata().hbar,
                               EntropyRateMode mode = EntropyRateMode::PeriodAveraged);

struct SieveOptions {
  EntropyRateMode mode = EntropyRateMode::PeriodAveraged;
  double reference_omega = 0.0;  // squeezing reference; 0 selects w*
  double r_bound = 3.0;
  int theta_samples = 16;
  double tolerance = 1e-7;
  int max_iterations = 200;
  std::vector<double> check_times_gamma = {0.0, 0.1, 0.5};  // units of 1/Gamma
  std::vector<double> competitor_r = {0.1, 0.3, 0.6};
};

struct SieveSample {
  double r;
  double theta;
  double rate;
};

struct SieveTimeCheck {
  double t;                      // s; 0 means the initial rate
  double optimum_value;          // rate at t = 0, linear entropy otherwise
  std::vector<double> competitors;  // same order as SieveOptions::competitor_r
  bool optimum_is_least;
  bool ordering_preserved;
};

struct SieveResult {
  double r = 0.0;      // optimal squeezing, >= 0
  double theta = 0.0;  // squeeze angle in [0, pi)
  double entropy_rate = 0.0;
  int iterations = 0;
  std::vector<SieveSample> landscape;
  std::vector<SieveTimeCheck> time_checks;
  bool robust = true;
};

/// Predictability sieve over pure Gaussian states: minimizes the entropy
/// production rate over squeezing (r, theta), then checks that the optimum
/// keeps the least entropy at later times. Throws OptimizationFailure when a
/// golden-section search fails to converge.
SieveResult sieve_search(const GaussianModel& m, double hbar = PhysicalConstants::codata().hbar,
                         const SieveOptions& opts = {});

}  // namespace dce
