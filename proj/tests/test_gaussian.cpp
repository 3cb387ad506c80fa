#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dce/gaussian.hpp"

using namespace dce;
using std::numbers::pi;

namespace {

// hbar = M = omega = 1 keeps every moment O(1).
constexpr double kHbar = 1.0;

GaussianModel oscillator(double gamma, double dpp, double dxp = 0.0, double dxx = 0.0,
                         double omega = 1.0, double mass = 1.0) {
  GaussianModel m;
  m.mass = mass;
  m.omega_star = omega;
  m.gamma = gamma;
  m.diffusion = {dpp, dxp, dxx};
  return m;
}

/// Vacuum coefficients D1 = hbar M omega Gamma.
GaussianModel vacuum(double gamma) { return oscillator(gamma, gamma); }

double max_rel(const GaussianState& a, const GaussianState& b) {
  // Units with hbar = M = omega = 1: means are compared on the scale of the
  // wavepacket width when they are smaller than it.
  const double cov_scale = std::sqrt(b.cov_xx * b.cov_xx + 2.0 * b.cov_xp * b.cov_xp +
                                     b.cov_pp * b.cov_pp);
  const double mean_scale =
      std::max(std::hypot(b.mean_x, b.mean_p), std::sqrt(b.cov_xx + b.cov_pp));
  double e = std::hypot(a.mean_x - b.mean_x, a.mean_p - b.mean_p) / mean_scale;
  e = std::max(e, std::abs(a.cov_xx - b.cov_xx) / cov_scale);
  e = std::max(e, std::abs(a.cov_xp - b.cov_xp) / cov_scale);
  e = std::max(e, std::abs(a.cov_pp - b.cov_pp) / cov_scale);
  return e;
}

}  // namespace

TEST_CASE("zero-time evolution is the identity") {
  const auto s = squeezed_state(1.0, 1.0, 0.4, 0.3, kHbar, 1.0, -2.0);
  const auto m = vacuum(0.01);
  const auto a = evolve(s, m, 0.0, 0.01);
  CHECK(a.mean_x == s.mean_x);
  CHECK(a.cov_xp == s.cov_xp);
  CHECK(max_rel(propagate_exact(s, m, 0.0, kHbar), s) < 1e-15);
}

TEST_CASE("undamped evolution is a rigid rotation") {
  const auto m = oscillator(0.0, 0.0);
  const auto s = squeezed_state(1.0, 1.0, 0.7, 0.2, kHbar, 2.0, 0.5);
  for (double t : {0.3, 1.7, 2.0 * pi}) {
    const auto e = propagate_exact(s, m, t, kHbar);
    const double c = std::cos(t);
    const double sn = std::sin(t);
    GaussianState ref;
    ref.mean_x = c * s.mean_x + sn * s.mean_p;
    ref.mean_p = -sn * s.mean_x + c * s.mean_p;
    ref.cov_xx = c * c * s.cov_xx + 2 * c * sn * s.cov_xp + sn * sn * s.cov_pp;
    ref.cov_pp = sn * sn * s.cov_xx - 2 * c * sn * s.cov_xp + c * c * s.cov_pp;
    ref.cov_xp = -c * sn * s.cov_xx + (c * c - sn * sn) * s.cov_xp + c * sn * s.cov_pp;
    CHECK(max_rel(e, ref) < 1e-12);
    CHECK(e.det() == doctest::Approx(s.det()).epsilon(1e-12));
  }
}

TEST_CASE("RK4 agrees with the closed-form propagator") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double omega = 0.5 + u(rng);
    const double gamma = 0.2 * u(rng);
    const double dpp = 0.5 + u(rng);
    const double dxp = 0.05 * (u(rng) - 0.5);
    auto m = oscillator(gamma, dpp, dxp, 0.0, omega, 0.5 + u(rng));
    const auto s = squeezed_state(m.mass, omega, u(rng), pi * u(rng), kHbar, 3.0 * u(rng),
                                  -3.0 * u(rng));
    const double t = 2.0 * pi / omega;
    const auto rk = evolve(s, m, t, 1e-3 * t);
    const auto ex = propagate_exact(s, m, t, kHbar);
    CHECK(max_rel(rk, ex) < 1e-8);
  }
}

TEST_CASE("propagator is a semigroup") {
  const auto m = oscillator(0.05, 0.3, -0.02, 0.0, 1.3, 0.8);
  const auto s = squeezed_state(0.8, 1.3, 0.5, 1.0, kHbar, 1.0, 1.0);
  const auto once = propagate_exact(s, m, 7.0, kHbar);
  const auto twice = propagate_exact(propagate_exact(s, m, 3.0, kHbar), m, 4.0, kHbar);
  CHECK(max_rel(once, twice) < 1e-12);
}

TEST_CASE("mean follows the damped-oscillator envelope") {
  const double omega = 2.0;
  const double gamma = 0.1;
  const auto m = oscillator(gamma, 0.0, 0.0, 0.0, omega);
  GaussianState s = coherent_state(1.0, omega, 1.5, 0.0, kHbar);
  // x'' + 2 Gamma x' + omega^2 x = 0 with x(0) = 1.5, x'(0) = 0.
  const double nu = std::sqrt(omega * omega - gamma * gamma);
  for (double t : {0.5, 3.0, 20.0}) {
    const auto e = propagate_exact(s, m, t, kHbar);
    const double x = 1.5 * std::exp(-gamma * t) * (std::cos(nu * t) + gamma / nu * std::sin(nu * t));
    CHECK(e.mean_x == doctest::Approx(x).epsilon(1e-11));
  }
}

TEST_CASE("free diffusion spreads with the cubic law") {
  const double d = 0.3;
  const double mass = 2.0;
  GaussianModel m;
  m.mass = mass;
  m.diffusion.pp = d;
  GaussianState s{0.0, 0.0, 0.5, 0.1, 0.7};
  const double t = 3.0;
  const auto e = evolve(s, m, t, 1e-3);
  CHECK(e.cov_pp == doctest::Approx(s.cov_pp + 2.0 * d * t).epsilon(1e-12));
  CHECK(e.cov_xp == doctest::Approx(s.cov_xp + s.cov_pp * t / mass + d * t * t / mass)
                        .epsilon(1e-12));
  CHECK(e.cov_xx == doctest::Approx(s.cov_xx + 2.0 * s.cov_xp * t / mass +
                                    s.cov_pp * t * t / (mass * mass) +
                                    2.0 * d * t * t * t / (3.0 * mass * mass))
                        .epsilon(1e-12));
}

TEST_CASE("steady state and equipartition") {
  const double mass = 1.7;
  const double omega = 0.9;
  const double gamma = 0.05;
  const double kt = 40.0;  // kT >> hbar omega
  const auto m = oscillator(gamma, 2.0 * mass * kt * gamma, 0.0, 0.0, omega, mass);
  const auto ss = steady_state(m, kHbar);
  CHECK(ss.cov_pp == doctest::Approx(mass * kt).epsilon(1e-12));
  CHECK(ss.cov_xx == doctest::Approx(kt / (mass * omega * omega)).epsilon(1e-12));
  CHECK(std::abs(ss.cov_xp) < 1e-12 * ss.cov_pp);
  const auto late = propagate_exact(coherent_state(mass, omega, 3.0, 0.0, kHbar), m, 40.0 / gamma,
                                    kHbar);
  CHECK(max_rel(late, ss) < 1e-9);
  CHECK_THROWS_AS(steady_state(oscillator(0.0, 1.0), kHbar), DomainError);
}

TEST_CASE("vacuum coefficients leave the coherent state stationary") {
  const auto m = vacuum(0.02);
  const auto c = coherent_state(1.0, 1.0, 0.0, 0.0, kHbar);
  const auto ss = steady_state(m, kHbar);
  CHECK(max_rel(ss, c) < 1e-12);
  const auto e = evolve(c, m, 50.0, 0.01);
  CHECK(purity(e, kHbar) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("purity of Gaussian states") {
  CHECK(purity(coherent_state(3.0, 2.0, 0.0, 0.0, kHbar), kHbar) == doctest::Approx(1.0));
  GaussianState s{0.0, 0.0, 1.0, 0.0, 1.0};  // det = hbar^2
  CHECK(purity(s, kHbar) == doctest::Approx(0.5));
  CHECK(linear_entropy(s, kHbar) == doctest::Approx(0.5));
  CHECK_THROWS_AS(purity(GaussianState{}, kHbar), DomainError);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto sq = squeezed_state(0.1 + u(rng), 0.1 + u(rng), 3.0 * u(rng), pi * u(rng), kHbar);
    CHECK(purity(sq, kHbar) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("SI model from mirror parameters") {
  MirrorParams p;
  p.mass = 2e-21;
  p.omega0 = 1e10;
  p.delta_omega = 1e3;
  CoefficientSet c{1e-3, 5.0, 0.2, p.omega_star()};
  const auto m = GaussianModel::from(p, c);
  CHECK(m.mass == p.mass);
  CHECK(m.omega_star == p.omega_star());
  CHECK(m.diffusion.pp == 5.0);
  CHECK(m.diffusion.xp == -0.1);
  CHECK(m.diffusion.xx == 0.0);
  const GaussianState s{1e-12, 1e-20, 1e-24, 0.0, 1e-40};
  const auto a = moment_derivatives(s, p, c);
  const auto b = moment_derivatives(s, m);
  CHECK(a.cov_xp == b.cov_xp);
  CHECK(b.mean_p == doctest::Approx(-p.mass * m.omega_star * m.omega_star * s.mean_x -
                                    2.0 * c.gamma * s.mean_p));
}

TEST_CASE("step size guard") {
  const auto m = vacuum(0.01);
  const auto s = coherent_state(1.0, 1.0, 0.0, 0.0, kHbar);
  CHECK_THROWS_AS(evolve(s, m, 1.0, 0.1), StepSizeError);
  CHECK_THROWS_AS(evolve(s, m, 1.0, 0.0), StepSizeError);
  CHECK_THROWS_AS(evolve(s, m, -1.0, 0.01), DomainError);
}

TEST_CASE("entropy production rate") {
  SUBCASE("no diffusion and no damping: zero for every pure state") {
    const auto m = oscillator(0.0, 0.0);
    for (double r : {0.0, 0.5, 1.5}) {
      const auto s = squeezed_state(1.0, 1.0, r, 0.4, kHbar);
      CHECK(entropy_production_rate(s, m, kHbar, EntropyRateMode::Instantaneous) == 0.0);
      CHECK(entropy_production_rate(s, m, kHbar) == 0.0);
    }
  }
  SUBCASE("damping alone contracts the phase-space area") {
    const auto m = oscillator(0.03, 0.0);
    const auto s = squeezed_state(1.0, 1.0, 0.8, 1.1, kHbar);
    CHECK(entropy_production_rate(s, m, kHbar, EntropyRateMode::Instantaneous) ==
          doctest::Approx(-2.0 * 0.03));
  }
  SUBCASE("rate matches the derivative of the exact linear entropy") {
    const auto m = oscillator(0.02, 0.4, 0.0, 0.0, 1.0);
    const auto s = squeezed_state(1.0, 1.0, 0.6, 0.9, kHbar);
    const double h = 1e-5;
    const double fd = (linear_entropy(propagate_exact(s, m, h, kHbar), kHbar) -
                       linear_entropy(s, kHbar)) / h;
    CHECK(entropy_production_rate(s, m, kHbar, EntropyRateMode::Instantaneous) ==
          doctest::Approx(fd).epsilon(1e-4));
  }
  SUBCASE("coherent state minimizes the period-averaged rate") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double kt : {0.0, 50.0}) {
      const double gamma = 0.01;
      const double d1 = kt > 0.0 ? 2.0 * kt * gamma : gamma;
      const auto m = oscillator(gamma, d1);
      const double coherent =
          entropy_production_rate(coherent_state(1.0, 1.0, 0.0, 0.0, kHbar), m, kHbar);
      for (int i = 0; i < 1000; ++i) {
        const auto s = squeezed_state(1.0, 1.0, 2.0 * u(rng), pi * u(rng), kHbar);
        CHECK(entropy_production_rate(s, m, kHbar) >= coherent - 1e-14);
      }
      double last = coherent;
      for (double r = 0.05; r < 2.0; r += 0.05) {
        const double rate = entropy_production_rate(squeezed_state(1.0, 1.0, r, 0.7, kHbar), m, kHbar);
        CHECK(rate > last);
        last = rate;
      }
    }
  }
  CHECK_THROWS_AS(entropy_production_rate(GaussianState{0, 0, 1, 0, 1}, vacuum(0.1), kHbar),
                  DomainError);
}

TEST_CASE("sieve selects coherent states for the physical coefficients") {
  for (double kt : {0.0, 50.0}) {
    const double gamma = 0.01;
    const auto m = oscillator(gamma, kt > 0.0 ? 2.0 * kt * gamma : gamma);
    const auto res = sieve_search(m, kHbar);
    CAPTURE(kt);
    CHECK(res.r <= 1e-3);
    CHECK(res.robust);
    REQUIRE(res.time_checks.size() == 3);
    for (const auto& c : res.time_checks) {
      CHECK(c.optimum_is_least);
      CHECK(c.ordering_preserved);
    }
    CHECK_FALSE(res.landscape.empty());
  }
}

TEST_CASE("sieve finds the analytic optimum of an anisotropic test model") {
  // Instantaneous rate ~ Dpp Vxx + Dxx Vpp on the pure-state hyperbola
  // Vxx Vpp = 1/4 is least at Vxx = sqrt(Dxx / Dpp) / 2, i.e. e^{2r} = 4 along p.
  const double dpp = 0.1;
  const auto m = oscillator(0.01, dpp, 0.0, 16.0 * dpp);
  SieveOptions opts;
  opts.mode = EntropyRateMode::Instantaneous;
  const auto res = sieve_search(m, kHbar, opts);
  CHECK(res.r == doctest::Approx(std::log(4.0) / 2.0).epsilon(1e-5));
  CHECK(res.theta == doctest::Approx(pi / 2.0).epsilon(1e-5));
  const auto opt = squeezed_state(1.0, 1.0, res.r, res.theta, kHbar);
  CHECK(opt.cov_xx == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("sieve rejects models without diffusion") {
  CHECK_THROWS_AS(sieve_search(oscillator(0.01, 0.0), kHbar), DomainError);
}
