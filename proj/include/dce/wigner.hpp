#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dce/errors.hpp"
#include "dce/gaussian.hpp"
#include "dce/params.hpp"
#include "dce/spectra.hpp"

namespace dce {

// The solver works in nondimensional phase space with hbar = 1: positions in
// a length unit l, momenta in hbar / l, times in a time unit tau.

struct Scaling {
  double length = 1.0;    // m
  double momentum = 1.0;  // kg m / s, always hbar / length
  double time = 1.0;      // s
};

/// Oscillator units: l = sqrt(hbar / (M w*)), tau = 1 / w*. A coherent state
/// has unit-free variances 1/2 in both directions.
Scaling oscillator_scaling(const MirrorParams& p, const CoefficientSet& c,
                           const PhysicalConstants& k = PhysicalConstants::codata());
/// Thermal units for a free particle: l = lambda_T, tau = 1 / Gamma.
Scaling thermal_scaling(const MirrorParams& p, const CoefficientSet& c,
                        const PhysicalConstants& k = PhysicalConstants::codata());

/// Coefficients of the nondimensional equation
///   dW/dt = -a P dW/dX + b X dW/dP + g d(P W)/dP + dpp d^2W/dP^2 - d2 d^2W/dXdP.
struct ScaledModel {
  double drift = 1.0;    // a
  double spring = 1.0;   // b
  double damping = 0.0;  // g = 2 Gamma tau
  double dpp = 0.0;
  double d2 = 0.0;

  /// Angular frequency of the damped rotation, 0 when not underdamped.
  double rotation_frequency() const;
};

ScaledModel scale_model(const MirrorParams& p, const CoefficientSet& c, const Scaling& s,
                        const PhysicalConstants& k = PhysicalConstants::codata());

/// Gaussian moments between SI and scaled units.
GaussianState to_scaled(const GaussianState& si, const Scaling& s);
GaussianState to_si(const GaussianState& scaled, const Scaling& s);

/// The same model as a Gaussian moment system (mass 1/a, hbar = 1).
GaussianModel gaussian_model(const ScaledModel& m);

struct GridSpec {
  std::size_t nx = 256;
  std::size_t np = 256;
  double x_half_width = 10.0;
  double p_half_width = 10.0;
};

/// Wigner function sampled on X_i = -Lx + i hx, P_j = -Lp + j hp with
/// h = 2L / n. Values are stored with P contiguous.
class PhaseSpaceGrid {
 public:
  explicit PhaseSpaceGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t nx() const { return spec_.nx; }
  std::size_t np() const { return spec_.np; }
  double dx() const { return dx_; }
  double dp() const { return dp_; }
  double x(std::size_t i) const { return -spec_.x_half_width + static_cast<double>(i) * dx_; }
  double p(std::size_t j) const { return -spec_.p_half_width + static_cast<double>(j) * dp_; }

  double& at(std::size_t i, std::size_t j) { return values_[i * spec_.np + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * spec_.np + j]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double time = 0.0;

  double total_mass() const;
  double min_value() const;
  double max_value() const;

 private:
  GridSpec spec_;
  double dx_;
  double dp_;
  std::vector<double> values_;
};

enum class CatOrientation { PositionSeparated, MomentumSeparated };

/// Cat state (|alpha> + |-alpha>) / norm built from minimum-uncertainty lobes
/// with variances lobe_scale^2 / 2 in X and 1 / (2 lobe_scale^2) in P.
struct CatWignerSpec {
  double alpha_mag = 0.0;
  double phase = 0.0;
  CatOrientation orientation = CatOrientation::PositionSeparated;
  double lobe_scale = 1.0;

  /// Lobe centre (X0, P0); the other lobe sits at (-X0, -P0).
  std::pair<double, double> centre() const;
  /// Wave vector of the interference term cos(kx X + kp P).
  std::pair<double, double> fringe_wavevector() const;
  /// |separation| of the lobes in lobe-width units (Delta x / Delta x0).
  double separation_ratio() const { return 4.0 * alpha_mag; }
};

/// Analytic cat-state Wigner function at one point.
double cat_wigner(const CatWignerSpec& spec, double x, double p);

/// Half widths that hold the lobes with tails below 1e-8 of the peak.
GridSpec suggest_grid(const CatWignerSpec& spec, std::size_t n = 256, double margin = 1.5);

/// Throws GridTooSmall when the state has more than 1e-8 of its peak on the
/// boundary of the box.
PhaseSpaceGrid init_cat(const CatWignerSpec& spec, const GridSpec& grid);
PhaseSpaceGrid init_gaussian(const GaussianState& scaled, const GridSpec& grid);

enum class ShiftMethod {
  /// Conservative semi-Lagrangian remap: six-point interpolation of the
  /// cumulative mass along each line.
  Remap,
  /// Band-limited shift through the FFT. Exact for shears, but it spreads the
  /// remap error of the damping contraction over the box as sinc tails.
  /// Preferred when d2 != 0: without position diffusion the diffusion tensor
  /// is indefinite and amplifies the high-k interpolation error of Remap.
  Spectral,
};

struct SolverOptions {
  ShiftMethod shift = ShiftMethod::Remap;
  double norm_tolerance = 1e-8;      // per-step relative mass drift
  double boundary_tolerance = 1e-8;  // relative |W| mass in the edge strip
  std::size_t boundary_cells = 2;
};

/// Strang-split integrator: half diffusion, exact linear flow (rotation and
/// damping) applied as three shears and an isotropic contraction, half
/// diffusion. Every sub-step conserves the total mass.
class WignerSolver {
 public:
  WignerSolver(const ScaledModel& model, const GridSpec& grid, const SolverOptions& opts = {});
  ~WignerSolver();
  WignerSolver(WignerSolver&&) noexcept;
  WignerSolver& operator=(WignerSolver&&) noexcept;

  const ScaledModel& model() const { return model_; }

  /// Advances by dt. Throws StabilityViolation when the mass drifts or leaks
  /// into the boundary strip.
  void step(PhaseSpaceGrid& grid, double dt);

  /// Steps to `t_end` in increments of at most dt, calling `observe` after
  /// each step.
  void evolve(PhaseSpaceGrid& grid, double t_end, double dt,
              const std::function<void(const PhaseSpaceGrid&)>& observe = {});

 private:
  void diffuse(PhaseSpaceGrid& grid, double dt);
  void advect(PhaseSpaceGrid& grid, double dt);
  void check(const PhaseSpaceGrid& grid, double mass_before) const;

  struct Plans;
  ScaledModel model_;
  GridSpec spec_;
  SolverOptions opts_;
  std::unique_ptr<Plans> plans_;
};

/// Convenience wrapper that builds a solver for a single step.
void step(PhaseSpaceGrid& grid, const ScaledModel& model, double dt);

struct Marginals {
  std::vector<double> x;  // integral over P
  std::vector<double> p;  // integral over X
};

Marginals marginals(const PhaseSpaceGrid& grid);

/// Mean and covariance of the grid in scaled units.
GaussianState grid_moments(const PhaseSpaceGrid& grid);

/// 2 pi hbar * integral of W^2 (hbar = 1).
double grid_purity(const PhaseSpaceGrid& grid);

/// |integral W(X,P) exp(-i (kx X + kp P))|: the amplitude of one Fourier mode.
double fourier_amplitude(const PhaseSpaceGrid& grid, double kx, double kp);

/// Fringe visibility at the interference wave vector of `spec`, normalized by
/// the amplitude of the reference grid (normally the t = 0 state).
class FringeProbe {
 public:
  FringeProbe(const CatWignerSpec& spec, const PhaseSpaceGrid& reference);
  double visibility(const PhaseSpaceGrid& grid) const;

 private:
  double kx_;
  double kp_;
  double reference_;
};

double fringe_visibility(const PhaseSpaceGrid& grid, const CatWignerSpec& spec,
                         const PhaseSpaceGrid& reference);

struct TdFitOptions {
  double floor = 1e-3;
  double min_efoldings = 3.0;
  double min_r_squared = 0.99;
};

struct TdFit {
  double tau = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(v) = log(A) - t / tau over the samples above the
/// floor. Throws FitFailure when the series is too short or R^2 is below the
/// threshold.
TdFit measure_td(std::span<const double> times, std::span<const double> visibility,
                 const TdFitOptions& opts = {});

}  // namespace dce
