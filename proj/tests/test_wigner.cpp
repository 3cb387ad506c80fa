#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "dce/spectra.hpp"
#include "dce/wigner.hpp"
#include "oracles.hpp"

using namespace dce;
using std::numbers::pi;

namespace {

double l2_relative(const PhaseSpaceGrid& a, const PhaseSpaceGrid& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    num += d * d;
    den += b.values()[k] * b.values()[k];
  }
  return std::sqrt(num / den);
}

ScaledModel model(double a, double b, double g, double dpp, double d2 = 0.0) {
  ScaledModel m;
  m.drift = a;
  m.spring = b;
  m.damping = g;
  m.dpp = dpp;
  m.d2 = d2;
  return m;
}

GridSpec square(std::size_t n, double half_width) { return {n, n, half_width, half_width}; }

}  // namespace

TEST_CASE("cat Wigner function matches the wavefunction transform") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double alpha : {0.5, 2.0, 3.5}) {
    for (double phase : {0.0, 0.4, 2.0}) {
      for (auto orient : {CatOrientation::PositionSeparated, CatOrientation::MomentumSeparated}) {
        CatWignerSpec spec{alpha, phase, orient, 0.7};
        const auto [x0, p0] = spec.centre();
        const oracle::CatFromWavefunction ref(x0, p0, spec.lobe_scale);
        for (int i = 0; i < 8; ++i) {
          const double x = x0 * (2.0 * u(rng) - 1.0) + 0.5 * (u(rng) - 0.5);
          const double p = p0 * (2.0 * u(rng) - 1.0) + 0.5 * (u(rng) - 0.5);
          CAPTURE(alpha);
          CAPTURE(phase);
          CHECK(std::abs(cat_wigner(spec, x, p) - ref(x, p)) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("zero amplitude cat is the ground state") {
  const CatWignerSpec spec{0.0, 0.0, CatOrientation::PositionSeparated, 1.0};
  for (double x : {-1.0, 0.0, 0.3}) {
    for (double p : {-0.5, 0.0, 2.0}) {
      CHECK(cat_wigner(spec, x, p) == doctest::Approx(oracle::gaussian_wigner(x, p, 0, 0, 0.5, 0, 0.5)));
    }
  }
}

TEST_CASE("cat on the grid: normalization, purity and marginals") {
  const CatWignerSpec spec{3.0, 0.0, CatOrientation::PositionSeparated, 1.0};
  const auto g = init_cat(spec, suggest_grid(spec, 256));
  CHECK(g.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid_purity(g) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.min_value() < -0.1 * g.max_value());

  const auto m = marginals(g);
  // Position marginal: two peaks at +-X0 and a dip between them.
  const auto [x0, p0] = spec.centre();
  std::size_t left = 0;
  std::size_t right = 0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    if (g.x(i) < 0.0 && m.x[i] > m.x[left]) left = i;
    if (g.x(i) > 0.0 && m.x[i] > m.x[right]) right = i;
  }
  CHECK(g.x(left) == doctest::Approx(-x0).epsilon(0.02));
  CHECK(g.x(right) == doctest::Approx(x0).epsilon(0.02));
  CHECK(m.x[g.nx() / 2] < 1e-3 * m.x[right]);
}

TEST_CASE("fringe period from a discrete transform") {
  const CatWignerSpec spec{3.0, 0.0, CatOrientation::PositionSeparated, 1.0};
  const auto grid = suggest_grid(spec, 256);
  const auto g = init_cat(spec, grid);
  // Slice through X = 0, DFT along P.
  const std::size_t i0 = g.nx() / 2;
  REQUIRE(std::abs(g.x(i0)) < 1e-12);
  std::size_t best = 0;
  double best_amp = 0.0;
  for (std::size_t k = 1; k < g.np() / 2; ++k) {
    std::complex<double> sum = 0.0;
    for (std::size_t j = 0; j < g.np(); ++j) {
      sum += g.at(i0, j) * std::polar(1.0, -2.0 * pi * double(k * j) / double(g.np()));
    }
    if (std::abs(sum) > best_amp) {
      best_amp = std::abs(sum);
      best = k;
    }
  }
  const double bin = 2.0 * pi / (2.0 * grid.p_half_width);
  // The fringe cos(Delta x P) has wave number Delta x = 2 X0 (hbar = 1).
  const double delta_x = 2.0 * spec.centre().first;
  CHECK(std::abs(double(best) * bin - delta_x) <= bin);
  CHECK(spec.separation_ratio() == doctest::Approx(delta_x / std::sqrt(0.5)));
}

TEST_CASE("Gaussian marginals carry the covariance") {
  const GaussianState s{0.5, -1.0, 0.8, 0.3, 0.6};
  const auto g = init_gaussian(s, square(256, 8.0));
  const auto mom = grid_moments(g);
  CHECK(mom.mean_x == doctest::Approx(s.mean_x).epsilon(1e-10));
  CHECK(mom.cov_xx == doctest::Approx(s.cov_xx).epsilon(1e-10));
  CHECK(mom.cov_xp == doctest::Approx(s.cov_xp).epsilon(1e-10));
  CHECK(mom.cov_pp == doctest::Approx(s.cov_pp).epsilon(1e-10));
  const auto m = marginals(g);
  double sum = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    sum += m.x[i] * g.dx();
    var += m.x[i] * g.dx() * (g.x(i) - s.mean_x) * (g.x(i) - s.mean_x);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(var == doctest::Approx(s.cov_xx).epsilon(1e-10));
  CHECK(grid_purity(g) == doctest::Approx(0.5 / std::sqrt(s.det())).epsilon(1e-10));
}

TEST_CASE("free rotation returns the state after one period") {
  const auto rot = model(1.0, 1.0, 0.0, 0.0);
  SUBCASE("squeezed Gaussian, remap shifts") {
    const GaussianState s{2.0, 1.0, 0.25, 0.1, 1.2};
    const auto grid = square(256, 9.0);
    auto g = init_gaussian(s, grid);
    const auto g0 = g;
    WignerSolver solver(rot, grid);
    solver.evolve(g, 2.0 * pi, 2.0 * pi / 50.0);
    CHECK(l2_relative(g, g0) < 1e-3);
  }
  SUBCASE("cat, spectral shifts") {
    const CatWignerSpec spec{2.0, 0.0, CatOrientation::PositionSeparated, 1.0};
    const auto grid = suggest_grid(spec, 256);
    auto g = init_cat(spec, grid);
    const auto g0 = g;
    SolverOptions opts;
    opts.shift = ShiftMethod::Spectral;
    WignerSolver solver(rot, grid, opts);
    solver.evolve(g, 2.0 * pi, 2.0 * pi / 50.0);
    CHECK(l2_relative(g, g0) < 1e-3);
  }
}

TEST_CASE("free diffusion follows the cubic spreading law") {
  const double a = 0.5;
  const double d = 0.05;
  const GaussianState s{0.0, 0.0, 0.5, 0.0, 0.5};
  auto g = init_gaussian(s, GridSpec{256, 256, 12.0, 8.0});
  WignerSolver solver(model(a, 0.0, 0.0, d), g.spec());
  const double t = 4.0;
  solver.evolve(g, t, 0.02);
  const auto m = grid_moments(g);
  CHECK(m.cov_pp == doctest::Approx(s.cov_pp + 2.0 * d * t).epsilon(1e-6));
  CHECK(m.cov_xp == doctest::Approx(a * s.cov_pp * t + a * d * t * t).epsilon(1e-5));
  CHECK(m.cov_xx == doctest::Approx(s.cov_xx + a * a * s.cov_pp * t * t +
                                    2.0 * a * a * d * t * t * t / 3.0)
                        .epsilon(1e-5));
}

TEST_CASE("fringe visibility decays with the heat-kernel rate") {
  // P-directed fringe cos(2 X0 P) under free drift keeps its wave vector, so
  // its amplitude decays as exp(-dpp (2 X0)^2 t).
  const CatWignerSpec spec{2.0, 0.0, CatOrientation::PositionSeparated, 1.0};
  auto grid = suggest_grid(spec, 256);
  grid.x_half_width = 14.0;
  auto g = init_cat(spec, grid);
  const FringeProbe probe(spec, g);
  CHECK(probe.visibility(g) == doctest::Approx(1.0));
  const double dpp = 1.0 / 32.0;
  const double kp = 2.0 * spec.centre().first;
  WignerSolver solver(model(0.25, 0.0, 0.0, dpp), grid);
  for (double t : {0.5, 1.0, 2.0}) {
    solver.evolve(g, t, 0.01);
    CHECK(probe.visibility(g) == doctest::Approx(std::exp(-dpp * kp * kp * t)).epsilon(1e-4));
  }
}

TEST_CASE("grid evolution tracks the Gaussian moment equations") {
  const auto m = model(1.0, 1.0, 0.2, 0.15);
  const GaussianState s{3.0, 0.0, 0.5, 0.0, 0.5};
  auto g = init_gaussian(s, square(128, 12.0));
  WignerSolver solver(m, g.spec());
  const double t = 5.0;
  solver.evolve(g, t, 0.005 * 2.0 * pi);
  const auto ref = propagate_exact(s, gaussian_model(m), t, 1.0);
  const auto got = grid_moments(g);
  const double cov = std::sqrt(ref.cov_xx * ref.cov_xx + 2 * ref.cov_xp * ref.cov_xp +
                               ref.cov_pp * ref.cov_pp);
  CHECK(std::hypot(got.mean_x - ref.mean_x, got.mean_p - ref.mean_p) /
            std::hypot(ref.mean_x, ref.mean_p) < 1e-3);
  CHECK(std::abs(got.cov_xx - ref.cov_xx) / cov < 1e-3);
  CHECK(std::abs(got.cov_xp - ref.cov_xp) / cov < 1e-3);
  CHECK(std::abs(got.cov_pp - ref.cov_pp) / cov < 1e-3);
  CHECK(g.total_mass() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cross diffusion is handled by the two-dimensional kernel") {
  const auto m = model(1.0, 1.0, 0.0, 0.2, 0.1);
  const GaussianState s{0.0, 0.0, 0.5, 0.0, 0.5};
  auto g = init_gaussian(s, square(128, 12.0));
  SolverOptions opts;
  opts.shift = ShiftMethod::Spectral;
  WignerSolver solver(m, g.spec(), opts);
  solver.evolve(g, 3.0, 0.01);
  const auto ref = propagate_exact(s, gaussian_model(m), 3.0, 1.0);
  const auto got = grid_moments(g);
  CHECK(got.cov_xp == doctest::Approx(ref.cov_xp).epsilon(1e-3));
  CHECK(got.cov_xx == doctest::Approx(ref.cov_xx).epsilon(1e-3));
  CHECK(got.cov_pp == doctest::Approx(ref.cov_pp).epsilon(1e-3));
}

TEST_CASE("grid purity separates the coherent state from a squeezed competitor") {
  // Vacuum coefficients in oscillator units: dpp = g / 2.
  const auto m = model(1.0, 1.0, 0.04, 0.02);
  const GaussianState coherent{0.0, 0.0, 0.5, 0.0, 0.5};
  const double r = 0.5;
  const GaussianState squeezed{0.0, 0.0, 0.5 * std::exp(-2 * r), 0.0, 0.5 * std::exp(2 * r)};
  const auto grid = square(128, 9.0);
  auto a = init_gaussian(coherent, grid);
  auto b = init_gaussian(squeezed, grid);
  WignerSolver solver(m, grid);
  solver.evolve(a, 5.0, 0.02);
  solver.evolve(b, 5.0, 0.02);
  CHECK(grid_purity(a) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(grid_purity(b) < grid_purity(a) - 1e-3);
  const auto exact = propagate_exact(squeezed, gaussian_model(m), 5.0, 1.0);
  CHECK(grid_purity(b) == doctest::Approx(purity(exact, 1.0)).epsilon(1e-3));
}

TEST_CASE("scaled model reproduces the SI moment dynamics") {
  MirrorParams p;
  p.mass = 1e-21;
  p.omega0 = 1e10;
  const auto k = PhysicalConstants::codata();
  CoefficientSet c;
  c.omega_star = p.omega0;
  c.gamma = 1e7;  // artificial, keeps 1/Gamma within a few hundred periods
  c.d1 = k.hbar * p.mass * p.omega0 * c.gamma;
  const auto sc = oscillator_scaling(p, c);
  const auto sm = scale_model(p, c, sc);
  CHECK(sm.drift == doctest::Approx(1.0));
  CHECK(sm.spring == doctest::Approx(1.0));
  CHECK(sm.damping == doctest::Approx(2e-3));
  CHECK(sm.dpp == doctest::Approx(1e-3));
  CHECK(sm.rotation_frequency() == doctest::Approx(std::sqrt(1.0 - 1e-6)));

  const auto si0 = squeezed_state(p.mass, p.omega0, 0.3, 0.5, k.hbar, 4.0 * sc.length, 0.0);
  const double t = 1e-8;
  const auto direct = propagate_exact(si0, GaussianModel::from(p, c), t, k.hbar);
  const auto via = to_si(propagate_exact(to_scaled(si0, sc), gaussian_model(sm), t / sc.time, 1.0), sc);
  CHECK(via.mean_x == doctest::Approx(direct.mean_x).epsilon(1e-9));
  CHECK(via.cov_xx == doctest::Approx(direct.cov_xx).epsilon(1e-9));
  CHECK(via.cov_pp == doctest::Approx(direct.cov_pp).epsilon(1e-9));

  p.omega0 = 0.0;
  p.temperature = 300.0;
  c.omega_star = 0.0;
  CHECK_THROWS_AS(oscillator_scaling(p, c), DomainError);
  const auto th = thermal_scaling(p, c);
  CHECK(th.length == doctest::Approx(thermal_wavelength(p)));
  CHECK(th.time == doctest::Approx(1.0 / c.gamma));
}

TEST_CASE("decay-time fit") {
  const double tau = 1.7;
  std::vector<double> t;
  std::vector<double> v;
  for (int i = 0; i <= 40; ++i) {
    t.push_back(0.25 * i);
    v.push_back(0.9 * std::exp(-t.back() / tau));
  }
  const auto fit = measure_td(t, v);
  CHECK(fit.tau == doctest::Approx(tau).epsilon(1e-6));
  CHECK(fit.amplitude == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(fit.r_squared == doctest::Approx(1.0));

  const std::vector<double> short_t{0.0, 0.1};
  const std::vector<double> short_v{1.0, 0.9};
  CHECK_THROWS_AS(measure_td(short_t, short_v), FitFailure);
  const std::vector<double> flat_t{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> flat_v{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(measure_td(flat_t, flat_v, {1e-3, 0.0, 0.0}), FitFailure);
  CHECK_THROWS_AS(measure_td(flat_t, std::vector<double>{1.0, 0.5}), FitFailure);
  // Shallow series: fewer e-foldings than required.
  const std::vector<double> shallow{1.0, 0.9, 0.8, 0.7};
  CHECK_THROWS_AS(measure_td(flat_t, shallow), FitFailure);
  // Non-exponential shape.
  std::vector<double> bumpy;
  for (double x : t) bumpy.push_back(std::exp(-x) * (1.0 + 0.8 * std::sin(5.0 * x)) + 1e-3 * 2);
  CHECK_THROWS_AS(measure_td(t, bumpy), FitFailure);
}

TEST_CASE("grid guards") {
  CHECK_THROWS_AS(PhaseSpaceGrid(GridSpec{100, 128, 1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(PhaseSpaceGrid(GridSpec{128, 128, 0.0, 1.0}), DomainError);
  const CatWignerSpec spec{3.0, 0.0, CatOrientation::PositionSeparated, 1.0};
  CHECK_THROWS_AS(init_cat(spec, square(128, 4.0)), GridTooSmall);
  CHECK_THROWS_AS(WignerSolver(model(0.0, 1.0, 0.0, 0.0), square(64, 5.0)), DomainError);

  // Free drift carries the state into the boundary strip.
  auto g = init_gaussian(GaussianState{0.0, 3.0, 0.5, 0.0, 0.5}, square(128, 8.0));
  WignerSolver solver(model(1.0, 0.0, 0.0, 0.0), g.spec());
  CHECK_THROWS_AS(solver.evolve(g, 10.0, 0.05), StabilityViolation);
}
