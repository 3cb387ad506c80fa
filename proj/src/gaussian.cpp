#include "dce/gaussian.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dce {

using std::numbers::pi;

GaussianModel GaussianModel::from(const MirrorParams& p, const CoefficientSet& c) {
  require_physical(p);
  GaussianModel m;
  m.mass = p.mass;
  m.omega_star = c.omega_star;
  m.gamma = c.gamma;
  m.diffusion = {c.d1, -0.5 * c.d2, 0.0};
  return m;
}

MomentRates moment_derivatives(const GaussianState& s, const GaussianModel& m) {
  const double k = m.mass * m.omega_star * m.omega_star;
  const auto& d = m.diffusion;
  MomentRates r;
  r.mean_x = s.mean_p / m.mass;
  r.mean_p = -k * s.mean_x - 2.0 * m.gamma * s.mean_p;
  r.cov_xx = 2.0 * s.cov_xp / m.mass + 2.0 * d.xx;
  r.cov_xp = s.cov_pp / m.mass - k * s.cov_xx - 2.0 * m.gamma * s.cov_xp + 2.0 * d.xp;
  r.cov_pp = -2.0 * k * s.cov_xp - 4.0 * m.gamma * s.cov_pp + 2.0 * d.pp;
  return r;
}

MomentRates moment_derivatives(const GaussianState& s, const MirrorParams& p,
                               const CoefficientSet& c) {
  return moment_derivatives(s, GaussianModel::from(p, c));
}

namespace {

GaussianState axpy(const GaussianState& s, double h, const MomentRates& r) {
  return {s.mean_x + h * r.mean_x, s.mean_p + h * r.mean_p, s.cov_xx + h * r.cov_xx,
          s.cov_xp + h * r.cov_xp, s.cov_pp + h * r.cov_pp};
}

MomentRates combine(const MomentRates& a, const MomentRates& b, const MomentRates& c,
                    const MomentRates& d) {
  const auto f = [](double w, double x, double y, double z) { return (w + 2 * x + 2 * y + z) / 6; };
  return {f(a.mean_x, b.mean_x, c.mean_x, d.mean_x), f(a.mean_p, b.mean_p, c.mean_p, d.mean_p),
          f(a.cov_xx, b.cov_xx, c.cov_xx, d.cov_xx), f(a.cov_xp, b.cov_xp, c.cov_xp, d.cov_xp),
          f(a.cov_pp, b.cov_pp, c.cov_pp, d.cov_pp)};
}

double fastest_scale(const GaussianModel& m) {
  double scale = std::numeric_limits<double>::infinity();
  if (m.omega_star > 0.0) scale = std::min(scale, 2.0 * pi / m.omega_star);
  if (m.gamma > 0.0) scale = std::min(scale, 1.0 / m.gamma);
  return scale;
}

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// Linear system v' = A v + b in oscillator-scaled variables, where every
// entry of A is O(omega). `scale` maps SI moments to scaled ones.
struct ScaledLinearSystem {
  Mat5 a = Mat5::Zero();
  Vec5 b = Vec5::Zero();
  Vec5 scale = Vec5::Ones();
};

ScaledLinearSystem linear_system(const GaussianModel& m, double hbar, double omega_ref) {
  const double len = std::sqrt(hbar / (m.mass * omega_ref));
  const double mom = hbar / len;
  ScaledLinearSystem s;
  s.scale << 1.0 / len, 1.0 / mom, 1.0 / (len * len), 1.0 / hbar, 1.0 / (mom * mom);

  const double k = m.mass * m.omega_star * m.omega_star;
  const auto& d = m.diffusion;
  Mat5 a = Mat5::Zero();
  a(0, 1) = 1.0 / m.mass;
  a(1, 0) = -k;
  a(1, 1) = -2.0 * m.gamma;
  a(2, 3) = 2.0 / m.mass;
  a(3, 4) = 1.0 / m.mass;
  a(3, 2) = -k;
  a(3, 3) = -2.0 * m.gamma;
  a(4, 3) = -2.0 * k;
  a(4, 4) = -4.0 * m.gamma;
  Vec5 b;
  b << 0.0, 0.0, 2.0 * d.xx, 2.0 * d.xp, 2.0 * d.pp;

  const Mat5 sm = s.scale.asDiagonal();
  const Mat5 sinv = s.scale.cwiseInverse().asDiagonal();
  s.a = sm * a * sinv;
  s.b = sm * b;
  return s;
}

Vec5 to_vec(const GaussianState& s) {
  Vec5 v;
  v << s.mean_x, s.mean_p, s.cov_xx, s.cov_xp, s.cov_pp;
  return v;
}

GaussianState from_vec(const Vec5& v) { return {v(0), v(1), v(2), v(3), v(4)}; }

double reference_omega(const GaussianModel& m, double t) {
  if (m.omega_star > 0.0) return m.omega_star;
  if (m.gamma > 0.0) return m.gamma;
  return t > 0.0 ? 1.0 / t : 1.0;
}

}  // namespace

GaussianState evolve(const GaussianState& s, const GaussianModel& m, double t, double dt) {
  if (!(t >= 0.0)) throw DomainError("evolution time must be non-negative");
  if (t == 0.0) return s;
  if (!(dt > 0.0)) throw StepSizeError("time step must be positive");
  const double limit = 0.01 * fastest_scale(m);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "dt = " << dt << " exceeds 1% of the fastest time scale (" << limit << ")";
    throw StepSizeError(msg.str());
  }
  const auto steps = static_cast<long>(std::ceil(t / dt - 1e-9));
  const double h = t / static_cast<double>(steps);
  GaussianState cur = s;
  for (long i = 0; i < steps; ++i) {
    const auto k1 = moment_derivatives(cur, m);
    const auto k2 = moment_derivatives(axpy(cur, 0.5 * h, k1), m);
    const auto k3 = moment_derivatives(axpy(cur, 0.5 * h, k2), m);
    const auto k4 = moment_derivatives(axpy(cur, h, k3), m);
    cur = axpy(cur, h, combine(k1, k2, k3, k4));
    if (!cur.positive_definite()) {
      std::ostringstream msg;
      msg << "covariance lost positive definiteness at step " << i << "; reduce dt";
      throw StepSizeError(msg.str());
    }
  }
  return cur;
}

GaussianState propagate_exact(const GaussianState& s, const GaussianModel& m, double t,
                              double hbar) {
  if (!(t >= 0.0)) throw DomainError("evolution time must be non-negative");
  if (t == 0.0) return s;
  const auto sys = linear_system(m, hbar, reference_omega(m, t));
  const Vec5 v0 = sys.scale.cwiseProduct(to_vec(s));

  // Diagonalize when A is invertible and well conditioned: stays accurate for
  // arbitrarily many rotations, unlike scaling-and-squaring.
  Eigen::EigenSolver<Mat5> es(sys.a);
  const Eigen::Matrix<std::complex<double>, 5, 5> vecs = es.eigenvectors();
  const Eigen::JacobiSVD<Eigen::Matrix<std::complex<double>, 5, 5>> svd(vecs);
  const double cond = svd.singularValues()(0) / svd.singularValues()(4);
  const bool invertible = m.gamma > 0.0 && m.omega_star > 0.0;

  Vec5 vt;
  if (invertible && es.info() == Eigen::Success && cond < 1e8) {
    const Vec5 vss = -sys.a.fullPivLu().solve(sys.b);
    const Eigen::Matrix<std::complex<double>, 5, 1> c =
        vecs.fullPivLu().solve((v0 - vss).cast<std::complex<double>>());
    Eigen::Matrix<std::complex<double>, 5, 1> ev = es.eigenvalues();
    for (int i = 0; i < 5; ++i) ev(i) = std::exp(ev(i) * t) * c(i);
    vt = vss + (vecs * ev).real();
  } else {
    Eigen::Matrix<double, 6, 6> aug = Eigen::Matrix<double, 6, 6>::Zero();
    aug.topLeftCorner<5, 5>() = sys.a * t;
    aug.topRightCorner<5, 1>() = sys.b * t;
    const Eigen::Matrix<double, 6, 6> e = aug.exp();
    vt = e.topLeftCorner<5, 5>() * v0 + e.topRightCorner<5, 1>();
  }
  return from_vec(vt.cwiseQuotient(sys.scale));
}

GaussianState steady_state(const GaussianModel& m, double hbar) {
  if (!(m.gamma > 0.0) || !(m.omega_star > 0.0)) {
    throw DomainError("steady state needs gamma > 0 and omega* > 0");
  }
  const auto sys = linear_system(m, hbar, m.omega_star);
  const Vec5 vss = -sys.a.fullPivLu().solve(sys.b);
  return from_vec(vss.cwiseQuotient(sys.scale));
}

double purity(const GaussianState& s, double hbar) {
  if (!(s.det() > 0.0)) throw DomainError("covariance is not positive definite");
  return hbar / (2.0 * std::sqrt(s.det()));
}

double linear_entropy(const GaussianState& s, double hbar) { return 1.0 - purity(s, hbar); }

GaussianState squeezed_state(double mass, double omega, double r, double theta, double hbar,
                             double mean_x, double mean_p) {
  if (!(mass > 0.0) || !(omega > 0.0)) {
    throw DomainError("squeezing reference needs mass > 0 and omega > 0");
  }
  const double len2 = hbar / (mass * omega);
  const double mom2 = hbar * mass * omega;
  const double ch = std::cosh(2.0 * r);
  const double sh = std::sinh(2.0 * r);
  GaussianState s;
  s.mean_x = mean_x;
  s.mean_p = mean_p;
  s.cov_xx = 0.5 * len2 * (ch - sh * std::cos(2.0 * theta));
  s.cov_pp = 0.5 * mom2 * (ch + sh * std::cos(2.0 * theta));
  s.cov_xp = -0.5 * hbar * sh * std::sin(2.0 * theta);
  return s;
}

GaussianState coherent_state(double mass, double omega, double mean_x, double mean_p,
                             double hbar) {
  return squeezed_state(mass, omega, 0.0, 0.0, hbar, mean_x, mean_p);
}

double entropy_production_rate(const GaussianState& pure, const GaussianModel& m, double hbar,
                               EntropyRateMode mode) {
  const double p = purity(pure, hbar);
  if (std::abs(p - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "entropy production rate needs a pure state, purity = " << p;
    throw DomainError(msg.str());
  }
  double xx = pure.cov_xx;
  double pp = pure.cov_pp;
  double xp = pure.cov_xp;
  if (mode == EntropyRateMode::PeriodAveraged) {
    if (!(m.omega_star > 0.0)) throw DomainError("rotation average needs omega* > 0");
    const double mw = m.mass * m.omega_star;
    const double avg_xx = 0.5 * (xx + pp / (mw * mw));
    xx = avg_xx;
    pp = avg_xx * mw * mw;
    xp = 0.0;
  }
  const auto& d = m.diffusion;
  const double det = pure.det();
  const double ddet = -4.0 * m.gamma * det + 2.0 * (d.pp * xx + d.xx * pp - 2.0 * d.xp * xp);
  // S = 1 - hbar / (2 sqrt(det)) => dS/dt = P ddet / (2 det).
  return 0.5 * p * ddet / det;
}

// --- predictability sieve --------------------------------------------------

namespace {

struct GoldenResult {
  double x;
  double f;
  int iterations;
};

template <class F>
GoldenResult golden_minimize(F&& f, double lo, double hi, double tol, int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int it = 0;
  while (b - a > tol) {
    if (++it > max_iter) {
      std::ostringstream msg;
      msg << "golden-section search did not reach tolerance " << tol << " in " << max_iter
          << " iterations";
      throw OptimizationFailure(msg.str());
    }
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x), it};
}

}  // namespace

SieveResult sieve_search(const GaussianModel& m, double hbar, const SieveOptions& opts) {
  if (!(m.diffusion.pp > 0.0) && !(m.diffusion.xx > 0.0)) {
    throw DomainError("predictability sieve needs nonzero diffusion");
  }
  const double w_ref = opts.reference_omega > 0.0 ? opts.reference_omega : m.omega_star;
  if (!(w_ref > 0.0)) throw DomainError("sieve needs a squeezing reference frequency");

  const auto state = [&](double r, double theta) {
    return squeezed_state(m.mass, w_ref, r, theta, hbar);
  };
  const auto rate = [&](double r, double theta) {
    return entropy_production_rate(state(r, theta), m, hbar, opts.mode);
  };

  SieveResult out;
  // Signed r over theta in [0, pi/2) covers every squeeze: (-r, t) == (r, t + pi/2).
  const double half_pi = 0.5 * pi;
  double best_theta = 0.0;
  GoldenResult best{0.0, std::numeric_limits<double>::infinity(), 0};
  for (int i = 0; i < opts.theta_samples; ++i) {
    const double theta = half_pi * i / opts.theta_samples;
    const auto g = golden_minimize([&](double r) { return rate(r, theta); }, -opts.r_bound,
                                   opts.r_bound, opts.tolerance, opts.max_iterations);
    out.iterations += g.iterations;
    if (g.f < best.f) {
      best = g;
      best_theta = theta;
    }
    for (double r : {-opts.r_bound, -0.5 * opts.r_bound, 0.0, 0.5 * opts.r_bound, opts.r_bound}) {
      out.landscape.push_back({r, theta, rate(r, theta)});
    }
  }
  // Refine the angle around the best sample with a nested search.
  const double span = half_pi / opts.theta_samples;
  GoldenResult inner = best;
  const auto outer = golden_minimize(
      [&](double theta) {
        inner = golden_minimize([&](double r) { return rate(r, theta); }, -opts.r_bound,
                                opts.r_bound, opts.tolerance, opts.max_iterations);
        return inner.f;
      },
      best_theta - span, best_theta + span, opts.tolerance, opts.max_iterations);
  if (outer.f < best.f) {
    best = golden_minimize([&](double r) { return rate(r, outer.x); }, -opts.r_bound,
                           opts.r_bound, opts.tolerance, opts.max_iterations);
    best_theta = outer.x;
  }
  out.iterations += outer.iterations;

  double theta = best_theta;
  if (best.x < 0.0) theta += half_pi;
  theta = std::fmod(theta, pi);
  if (theta < 0.0) theta += pi;
  out.r = std::abs(best.x);
  out.theta = theta;
  out.entropy_rate = best.f;

  // Robustness: the optimum must keep the least entropy at later times, and
  // the competitor tower must keep its order.
  const GaussianState optimum = state(out.r, out.theta);
  for (double tg : opts.check_times_gamma) {
    if (tg > 0.0 && !(m.gamma > 0.0)) continue;
    SieveTimeCheck chk;
    chk.t = tg > 0.0 ? tg / m.gamma : 0.0;
    const auto value = [&](const GaussianState& s0) {
      if (tg == 0.0) return entropy_production_rate(s0, m, hbar, opts.mode);
      return linear_entropy(propagate_exact(s0, m, chk.t, hbar), hbar);
    };
    chk.optimum_value = value(optimum);
    chk.optimum_is_least = true;
    chk.ordering_preserved = true;
    for (std::size_t i = 0; i < opts.competitor_r.size(); ++i) {
      const double v = value(state(out.r + opts.competitor_r[i], out.theta));
      chk.competitors.push_back(v);
      const double slack = 1e-12 * std::max(std::abs(v), std::abs(chk.optimum_value));
      if (v + slack < chk.optimum_value) chk.optimum_is_least = false;
      if (i > 0 && !(v > chk.competitors[i - 1])) chk.ordering_preserved = false;
    }
    out.robust = out.robust && chk.optimum_is_least && chk.ordering_preserved;
    out.time_checks.push_back(std::move(chk));
  }
  return out;
}

}  // namespace dce
