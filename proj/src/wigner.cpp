#include "dce/wigner.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <sstream>

namespace dce {

using std::numbers::pi;

// --- units -----------------------------------------------------------------

Scaling oscillator_scaling(const MirrorParams& p, const CoefficientSet& c,
                           const PhysicalConstants& k) {
  require_physical(p);
  if (!(c.omega_star > 0.0)) throw DomainError("oscillator units need omega* > 0");
  Scaling s;
  s.length = std::sqrt(k.hbar / (p.mass * c.omega_star));
  s.momentum = k.hbar / s.length;
  s.time = 1.0 / c.omega_star;
  return s;
}

Scaling thermal_scaling(const MirrorParams& p, const CoefficientSet& c,
                        const PhysicalConstants& k) {
  if (!(c.gamma > 0.0)) throw DomainError("thermal units need gamma > 0");
  Scaling s;
  s.length = thermal_wavelength(p, k);
  s.momentum = k.hbar / s.length;
  s.time = 1.0 / c.gamma;
  return s;
}

double ScaledModel::rotation_frequency() const {
  const double nu2 = drift * spring - 0.25 * damping * damping;
  return nu2 > 0.0 ? std::sqrt(nu2) : 0.0;
}

ScaledModel scale_model(const MirrorParams& p, const CoefficientSet& c, const Scaling& s,
                        const PhysicalConstants& k) {
  require_physical(p);
  const double l2 = s.length * s.length;
  ScaledModel m;
  m.drift = k.hbar * s.time / (p.mass * l2);
  m.spring = p.mass * c.omega_star * c.omega_star * l2 * s.time / k.hbar;
  m.damping = 2.0 * c.gamma * s.time;
  m.dpp = c.d1 * s.time * l2 / (k.hbar * k.hbar);
  m.d2 = c.d2 * s.time / k.hbar;
  return m;
}

GaussianState to_scaled(const GaussianState& si, const Scaling& s) {
  const double action = s.length * s.momentum;
  return {si.mean_x / s.length, si.mean_p / s.momentum, si.cov_xx / (s.length * s.length),
          si.cov_xp / action, si.cov_pp / (s.momentum * s.momentum)};
}

GaussianState to_si(const GaussianState& sc, const Scaling& s) {
  const double action = s.length * s.momentum;
  return {sc.mean_x * s.length, sc.mean_p * s.momentum, sc.cov_xx * s.length * s.length,
          sc.cov_xp * action, sc.cov_pp * s.momentum * s.momentum};
}

GaussianModel gaussian_model(const ScaledModel& m) {
  GaussianModel g;
  g.mass = 1.0 / m.drift;
  g.omega_star = std::sqrt(m.spring * m.drift);
  g.gamma = 0.5 * m.damping;
  g.diffusion = {m.dpp, -0.5 * m.d2, 0.0};
  return g;
}

// --- grid ------------------------------------------------------------------

namespace {

bool power_of_two(std::size_t n) { return n >= 4 && (n & (n - 1)) == 0; }

}  // namespace

PhaseSpaceGrid::PhaseSpaceGrid(const GridSpec& spec) : spec_(spec) {
  if (!power_of_two(spec.nx) || !power_of_two(spec.np)) {
    throw DomainError("grid sizes must be powers of two");
  }
  if (!(spec.x_half_width > 0.0) || !(spec.p_half_width > 0.0)) {
    throw DomainError("grid half widths must be positive");
  }
  dx_ = 2.0 * spec.x_half_width / static_cast<double>(spec.nx);
  dp_ = 2.0 * spec.p_half_width / static_cast<double>(spec.np);
  values_.assign(spec.nx * spec.np, 0.0);
}

double PhaseSpaceGrid::total_mass() const {
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum * dx_ * dp_;
}

double PhaseSpaceGrid::min_value() const { return *std::min_element(values_.begin(), values_.end()); }
double PhaseSpaceGrid::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

// --- initial states --------------------------------------------------------

std::pair<double, double> CatWignerSpec::centre() const {
  const double angle =
      phase + (orientation == CatOrientation::MomentumSeparated ? 0.5 * pi : 0.0);
  const double r = std::sqrt(2.0) * alpha_mag;
  return {r * std::cos(angle) * lobe_scale, r * std::sin(angle) / lobe_scale};
}

std::pair<double, double> CatWignerSpec::fringe_wavevector() const {
  const auto [x0, p0] = centre();
  return {-2.0 * p0, 2.0 * x0};
}

double cat_wigner(const CatWignerSpec& spec, double x, double p) {
  const auto [x0, p0] = spec.centre();
  const double s2 = spec.lobe_scale * spec.lobe_scale;
  const double a2 = spec.alpha_mag * spec.alpha_mag;
  const double norm = 1.0 / (2.0 * (1.0 + std::exp(-2.0 * a2)));
  const auto lobe = [&](double cx, double cp) {
    const double u = x - cx;
    const double v = p - cp;
    return std::exp(-u * u / s2 - v * v * s2) / pi;
  };
  const double envelope = std::exp(-x * x / s2 - p * p * s2) / pi;
  const double fringe = std::cos(2.0 * (x0 * p - p0 * x));
  return norm * (lobe(x0, p0) + lobe(-x0, -p0) + 2.0 * envelope * fringe);
}

GridSpec suggest_grid(const CatWignerSpec& spec, std::size_t n, double margin) {
  const auto [x0, p0] = spec.centre();
  const double reach = std::hypot(x0 / spec.lobe_scale, p0 * spec.lobe_scale);
  const double sx = spec.lobe_scale / std::sqrt(2.0);
  const double sp = 1.0 / (spec.lobe_scale * std::sqrt(2.0));
  GridSpec g;
  g.nx = n;
  g.np = n;
  g.x_half_width = margin * (reach * spec.lobe_scale + 5.0 * sx);
  g.p_half_width = margin * (reach / spec.lobe_scale + 5.0 * sp);
  return g;
}

namespace {

void check_support(const PhaseSpaceGrid& g) {
  double peak = 0.0;
  for (double v : g.values()) peak = std::max(peak, std::abs(v));
  double edge = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    edge = std::max({edge, std::abs(g.at(i, 0)), std::abs(g.at(i, g.np() - 1))});
  }
  for (std::size_t j = 0; j < g.np(); ++j) {
    edge = std::max({edge, std::abs(g.at(0, j)), std::abs(g.at(g.nx() - 1, j))});
  }
  if (edge > 1e-8 * peak) {
    std::ostringstream msg;
    msg << "state reaches the grid boundary (edge/peak = " << edge / peak
        << "); enlarge the half widths";
    throw GridTooSmall(msg.str());
  }
}

}  // namespace

PhaseSpaceGrid init_cat(const CatWignerSpec& spec, const GridSpec& grid) {
  if (!(spec.alpha_mag >= 0.0)) throw DomainError("|alpha| must be non-negative");
  if (!(spec.lobe_scale > 0.0)) throw DomainError("lobe scale must be positive");
  PhaseSpaceGrid g(grid);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    for (std::size_t j = 0; j < g.np(); ++j) g.at(i, j) = cat_wigner(spec, g.x(i), g.p(j));
  }
  check_support(g);
  return g;
}

PhaseSpaceGrid init_gaussian(const GaussianState& s, const GridSpec& grid) {
  const double det = s.det();
  if (!(det > 0.0) || !(s.cov_xx > 0.0)) throw DomainError("covariance must be positive definite");
  PhaseSpaceGrid g(grid);
  const double norm = 1.0 / (2.0 * pi * std::sqrt(det));
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const double u = g.x(i) - s.mean_x;
    for (std::size_t j = 0; j < g.np(); ++j) {
      const double v = g.p(j) - s.mean_p;
      const double q = (s.cov_pp * u * u - 2.0 * s.cov_xp * u * v + s.cov_xx * v * v) / det;
      g.at(i, j) = norm * std::exp(-0.5 * q);
    }
  }
  check_support(g);
  return g;
}

// --- line primitives -------------------------------------------------------

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double wavenumber(std::size_t m, std::size_t n, double h) {
  return 2.0 * pi * static_cast<double>(m) / (static_cast<double>(n) * h);
}

constexpr std::ptrdiff_t kRemapStencil = 6;

// Cell averages from point samples, a_i = (f_i-1 + 22 f_i + f_i+1) / 24,
// with zero values outside the line.
void to_cell_averages(const double* f, std::size_t n, std::ptrdiff_t stride,
                      std::vector<double>& a) {
  a.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? f[static_cast<std::ptrdiff_t>(i - 1) * stride] : 0.0;
    const double right = i + 1 < n ? f[static_cast<std::ptrdiff_t>(i + 1) * stride] : 0.0;
    a[i] = (left + 22.0 * f[static_cast<std::ptrdiff_t>(i) * stride] + right) / 24.0;
  }
}

// Exact inverse of to_cell_averages (Thomas algorithm, in place on `a`).
void to_point_values(std::vector<double>& a, std::vector<double>& work) {
  const std::size_t n = a.size();
  constexpr double off = 1.0 / 24.0;
  constexpr double diag = 22.0 / 24.0;
  work.resize(n);
  work[0] = off / diag;
  a[0] /= diag;
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag - off * work[i - 1];
    work[i] = off / m;
    a[i] = (a[i] - off * a[i - 1]) / m;
  }
  for (std::size_t i = n - 1; i-- > 0;) a[i] -= work[i] * a[i + 1];
}

// Conservative remap of one strided line. The new cell [e_j, e_j+1] receives
// the old mass on [alpha e_j + beta, alpha e_j+1 + beta], read off a
// six-point Lagrange interpolant of the cumulative mass. Telescoping keeps the
// total exact. With `point_values` the samples are converted to cell averages
// first and back afterwards, which removes the O(h^2) moment bias of a
// contraction.
void remap_line(double* f, std::size_t n, std::ptrdiff_t stride, double h, double first_edge,
                double alpha, double beta, bool point_values, std::vector<double>& cum,
                std::vector<double>& out) {
  cum.resize(n + 1);
  out.resize(n);
  cum[0] = 0.0;
  if (point_values) {
    to_cell_averages(f, n, stride, out);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + out[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + f[static_cast<std::ptrdiff_t>(i) * stride];
  }
  const double total = cum[n];
  const auto cumulative = [&](double edge) {
    const double u = (alpha * edge + beta - first_edge) / h;
    if (u <= 0.0) return 0.0;
    if (u >= static_cast<double>(n)) return total;
    constexpr std::ptrdiff_t width = kRemapStencil;
    auto base = static_cast<std::ptrdiff_t>(std::floor(u)) - (width / 2 - 1);
    base = std::clamp<std::ptrdiff_t>(base, 0, static_cast<std::ptrdiff_t>(n) + 1 - width);
    const double t = u - static_cast<double>(base);
    double sum = 0.0;
    for (std::ptrdiff_t a = 0; a < width; ++a) {
      double w = 1.0;
      for (std::ptrdiff_t b = 0; b < width; ++b) {
        if (b != a) w *= (t - static_cast<double>(b)) / static_cast<double>(a - b);
      }
      sum += w * cum[base + a];
    }
    return sum;
  };
  double prev = cumulative(first_edge);
  for (std::size_t j = 0; j < n; ++j) {
    const double next = cumulative(first_edge + static_cast<double>(j + 1) * h);
    out[j] = next - prev;
    prev = next;
  }
  if (point_values) to_point_values(out, cum);
  for (std::size_t j = 0; j < n; ++j) f[static_cast<std::ptrdiff_t>(j) * stride] = out[j];
}

struct LineAxis {
  std::size_t n;          // points along the line
  std::size_t count;      // number of lines
  std::ptrdiff_t stride;  // between points of a line
  std::ptrdiff_t dist;    // between lines
  double h;
  double half_width;
};

}  // namespace

struct WignerSolver::Plans {
  fftw_plan p_fwd = nullptr;
  fftw_plan p_bwd = nullptr;
  fftw_plan x_fwd = nullptr;
  fftw_plan x_bwd = nullptr;
  fftw_plan full_fwd = nullptr;
  fftw_plan full_bwd = nullptr;
  fftw_complex* cp = nullptr;    // nx lines of np/2+1
  fftw_complex* cx = nullptr;    // (nx/2+1) x np
  fftw_complex* cfull = nullptr; // nx x (np/2+1)
  std::vector<double> cum;
  std::vector<double> out;

  Plans(std::size_t nx, std::size_t np) {
    const int inx = static_cast<int>(nx);
    const int inp = static_cast<int>(np);
    const std::size_t hp = np / 2 + 1;
    const std::size_t hx = nx / 2 + 1;
    double* scratch = fftw_alloc_real(nx * np);
    cp = fftw_alloc_complex(nx * hp);
    cx = fftw_alloc_complex(hx * np);
    cfull = fftw_alloc_complex(nx * hp);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    p_fwd = fftw_plan_many_dft_r2c(1, &inp, inx, scratch, nullptr, 1, inp, cp, nullptr, 1,
                                   static_cast<int>(hp), flags);
    p_bwd = fftw_plan_many_dft_c2r(1, &inp, inx, cp, nullptr, 1, static_cast<int>(hp), scratch,
                                   nullptr, 1, inp, flags);
    x_fwd = fftw_plan_many_dft_r2c(1, &inx, inp, scratch, nullptr, inp, 1, cx, nullptr, inp, 1,
                                   flags);
    x_bwd = fftw_plan_many_dft_c2r(1, &inx, inp, cx, nullptr, inp, 1, scratch, nullptr, inp, 1,
                                   flags);
    full_fwd = fftw_plan_dft_r2c_2d(inx, inp, scratch, cfull, flags);
    full_bwd = fftw_plan_dft_c2r_2d(inx, inp, cfull, scratch, flags);
    fftw_free(scratch);
  }

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    for (fftw_plan p : {p_fwd, p_bwd, x_fwd, x_bwd, full_fwd, full_bwd}) {
      if (p != nullptr) fftw_destroy_plan(p);
    }
    fftw_free(cp);
    fftw_free(cx);
    fftw_free(cfull);
  }

  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

WignerSolver::WignerSolver(const ScaledModel& model, const GridSpec& grid,
                           const SolverOptions& opts)
    : model_(model), spec_(grid), opts_(opts) {
  if (!(model.drift > 0.0)) throw DomainError("drift coefficient must be positive");
  if (!(model.dpp >= 0.0)) throw DomainError("momentum diffusion must be non-negative");
  PhaseSpaceGrid probe(grid);  // validates the grid
  plans_ = std::make_unique<Plans>(grid.nx, grid.np);
}

WignerSolver::~WignerSolver() = default;
WignerSolver::WignerSolver(WignerSolver&&) noexcept = default;
WignerSolver& WignerSolver::operator=(WignerSolver&&) noexcept = default;

namespace {

// Shift every line of one axis by its own amount: f(u) -> f(u - shift(line)).
template <class ShiftOf>
void shift_lines(double* data, const LineAxis& ax, fftw_plan fwd, fftw_plan bwd,
                 fftw_complex* spec, std::ptrdiff_t spec_stride, std::ptrdiff_t spec_dist,
                 ShiftOf&& shift_of) {
  fftw_execute_dft_r2c(fwd, data, spec);
  const std::size_t half = ax.n / 2;
  const double inv_n = 1.0 / static_cast<double>(ax.n);
  for (std::size_t line = 0; line < ax.count; ++line) {
    const double s = shift_of(line);
    fftw_complex* c = spec + static_cast<std::ptrdiff_t>(line) * spec_dist;
    for (std::size_t m = 0; m <= half; ++m) {
      const double k = wavenumber(m, ax.n, ax.h);
      auto* z = reinterpret_cast<std::complex<double>*>(c + static_cast<std::ptrdiff_t>(m) * spec_stride);
      if (m == half) {
        *z *= std::cos(k * s) * inv_n;
      } else {
        *z *= std::polar(inv_n, -k * s);
      }
    }
  }
  fftw_execute_dft_c2r(bwd, spec, data);
}

template <class ShiftOf>
void remap_lines(double* data, const LineAxis& ax, double alpha, bool point_values,
                 ShiftOf&& shift_of,
                 std::vector<double>& cum, std::vector<double>& out) {
  const double first_edge = -ax.half_width - 0.5 * ax.h;
  for (std::size_t line = 0; line < ax.count; ++line) {
    remap_line(data + static_cast<std::ptrdiff_t>(line) * ax.dist, ax.n, ax.stride, ax.h,
               first_edge, alpha, -shift_of(line), point_values, cum, out);
  }
}

// exp(A dt) for A = [[0, a], [-b, -g]] written as lambda * S with
// lambda = exp(-g dt / 2) and det S = 1.
struct FlowMap {
  double lambda;
  double s11, s12, s21, s22;
};

FlowMap flow_map(const ScaledModel& m, double dt) {
  const double a = m.drift;
  const double b = m.spring;
  const double g = m.damping;
  const double q2 = 0.25 * g * g - a * b;
  double c = 1.0;
  double s = dt;
  const double z = q2 * dt * dt;
  if (std::abs(z) < 1e-8) {
    c = 1.0 + 0.5 * z + z * z / 24.0;
    s = dt * (1.0 + z / 6.0 + z * z / 120.0);
  } else if (q2 < 0.0) {
    const double nu = std::sqrt(-q2);
    c = std::cos(nu * dt);
    s = std::sin(nu * dt) / nu;
  } else {
    const double q = std::sqrt(q2);
    c = std::cosh(q * dt);
    s = std::sinh(q * dt) / q;
  }
  return {std::exp(-0.5 * g * dt), c + 0.5 * g * s, a * s, -b * s, c - 0.5 * g * s};
}

}  // namespace

void WignerSolver::diffuse(PhaseSpaceGrid& grid, double dt) {
  if (model_.dpp == 0.0 && model_.d2 == 0.0) return;
  const std::size_t nx = spec_.nx;
  const std::size_t np = spec_.np;
  const std::size_t hp = np / 2 + 1;
  double* data = grid.values().data();
  if (model_.d2 == 0.0) {
    fftw_execute_dft_r2c(plans_->p_fwd, data, plans_->cp);
    const double inv_n = 1.0 / static_cast<double>(np);
    std::vector<double> factor(hp);
    for (std::size_t m = 0; m < hp; ++m) {
      const double k = wavenumber(m, np, grid.dp());
      factor[m] = std::exp(-model_.dpp * k * k * dt) * inv_n;
    }
    for (std::size_t i = 0; i < nx; ++i) {
      auto* row = reinterpret_cast<std::complex<double>*>(plans_->cp + i * hp);
      for (std::size_t m = 0; m < hp; ++m) row[m] *= factor[m];
    }
    fftw_execute_dft_c2r(plans_->p_bwd, plans_->cp, data);
    return;
  }
  // Cross diffusion couples the axes: exact multiplier in the 2D spectrum.
  fftw_execute_dft_r2c(plans_->full_fwd, data, plans_->cfull);
  const double inv_n = 1.0 / static_cast<double>(nx * np);
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t mi = i <= nx / 2 ? i : nx - i;
    double kx = wavenumber(mi, nx, grid.dx());
    if (i > nx / 2) kx = -kx;
    if (i == nx / 2) kx = 0.0;
    auto* row = reinterpret_cast<std::complex<double>*>(plans_->cfull + i * hp);
    for (std::size_t m = 0; m < hp; ++m) {
      const double kp = m == np / 2 ? 0.0 : wavenumber(m, np, grid.dp());
      const double kp_full = wavenumber(m, np, grid.dp());
      row[m] *= std::exp((-model_.dpp * kp_full * kp_full + model_.d2 * kx * kp) * dt) * inv_n;
    }
  }
  fftw_execute_dft_c2r(plans_->full_bwd, plans_->cfull, data);
}

void WignerSolver::advect(PhaseSpaceGrid& grid, double dt) {
  const FlowMap f = flow_map(model_, dt);
  // S = L(x) U(y) L(z) with L(c) = [[1, 0], [c, 1]], U(y) = [[1, y], [0, 1]].
  const double y = f.s12;
  const double z = (f.s11 - 1.0) / f.s12;
  const double x = (f.s22 - 1.0) / f.s12;

  const std::size_t nx = spec_.nx;
  const std::size_t np = spec_.np;
  double* data = grid.values().data();
  const LineAxis p_lines{np, nx, 1, static_cast<std::ptrdiff_t>(np), grid.dp(), spec_.p_half_width};
  const LineAxis x_lines{nx, np, static_cast<std::ptrdiff_t>(np), 1, grid.dx(), spec_.x_half_width};
  const std::ptrdiff_t hp = static_cast<std::ptrdiff_t>(np / 2 + 1);

  const auto p_shear = [&](double c) {
    const auto shift = [&](std::size_t i) { return c * grid.x(i); };
    if (opts_.shift == ShiftMethod::Spectral) {
      shift_lines(data, p_lines, plans_->p_fwd, plans_->p_bwd, plans_->cp, 1, hp, shift);
    } else {
      remap_lines(data, p_lines, 1.0, false, shift, plans_->cum, plans_->out);
    }
  };
  const auto x_shear = [&](double c) {
    const auto shift = [&](std::size_t j) { return c * grid.p(j); };
    if (opts_.shift == ShiftMethod::Spectral) {
      shift_lines(data, x_lines, plans_->x_fwd, plans_->x_bwd, plans_->cx,
                  static_cast<std::ptrdiff_t>(np), 1, shift);
    } else {
      remap_lines(data, x_lines, 1.0, false, shift, plans_->cum, plans_->out);
    }
  };

  p_shear(z);
  x_shear(y);
  p_shear(x);
  if (f.lambda != 1.0) {
    const auto none = [](std::size_t) { return 0.0; };
    remap_lines(data, x_lines, 1.0 / f.lambda, true, none, plans_->cum, plans_->out);
    remap_lines(data, p_lines, 1.0 / f.lambda, true, none, plans_->cum, plans_->out);
  }
}

void WignerSolver::check(const PhaseSpaceGrid& grid, double mass_before) const {
  const double mass = grid.total_mass();
  const double drift = std::abs(mass - mass_before) / std::abs(mass_before);
  if (!(drift <= opts_.norm_tolerance)) {
    std::ostringstream msg;
    msg << "norm drift " << drift << " exceeds " << opts_.norm_tolerance << " at t = " << grid.time;
    throw StabilityViolation(msg.str());
  }
  const std::size_t b = opts_.boundary_cells;
  double edge = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    const bool x_edge = i < b || i + b >= grid.nx();
    for (std::size_t j = 0; j < grid.np(); ++j) {
      if (x_edge || j < b || j + b >= grid.np()) edge += std::abs(grid.at(i, j));
    }
  }
  edge *= grid.dx() * grid.dp();
  if (edge > opts_.boundary_tolerance * std::abs(mass)) {
    std::ostringstream msg;
    msg << "boundary mass " << edge / std::abs(mass) << " exceeds " << opts_.boundary_tolerance
        << " at t = " << grid.time << "; enlarge the grid";
    throw StabilityViolation(msg.str());
  }
}

void WignerSolver::step(PhaseSpaceGrid& grid, double dt) {
  if (grid.nx() != spec_.nx || grid.np() != spec_.np ||
      grid.spec().x_half_width != spec_.x_half_width ||
      grid.spec().p_half_width != spec_.p_half_width) {
    throw DomainError("grid does not match the solver layout");
  }
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const double mass = grid.total_mass();
  diffuse(grid, 0.5 * dt);
  advect(grid, dt);
  diffuse(grid, 0.5 * dt);
  grid.time += dt;
  check(grid, mass);
}

void WignerSolver::evolve(PhaseSpaceGrid& grid, double t_end, double dt,
                          const std::function<void(const PhaseSpaceGrid&)>& observe) {
  const double span = t_end - grid.time;
  if (span <= 0.0) return;
  const auto steps = static_cast<long>(std::ceil(span / dt - 1e-9));
  const double h = span / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    step(grid, h);
    if (observe) observe(grid);
  }
}

void step(PhaseSpaceGrid& grid, const ScaledModel& model, double dt) {
  WignerSolver solver(model, grid.spec());
  solver.step(grid, dt);
}

// --- observables -----------------------------------------------------------

Marginals marginals(const PhaseSpaceGrid& g) {
  Marginals m;
  m.x.assign(g.nx(), 0.0);
  m.p.assign(g.np(), 0.0);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    for (std::size_t j = 0; j < g.np(); ++j) {
      m.x[i] += g.at(i, j) * g.dp();
      m.p[j] += g.at(i, j) * g.dx();
    }
  }
  return m;
}

GaussianState grid_moments(const PhaseSpaceGrid& g) {
  double m0 = 0, mx = 0, mp = 0, mxx = 0, mxp = 0, mpp = 0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const double x = g.x(i);
    for (std::size_t j = 0; j < g.np(); ++j) {
      const double w = g.at(i, j);
      const double p = g.p(j);
      m0 += w;
      mx += w * x;
      mp += w * p;
      mxx += w * x * x;
      mxp += w * x * p;
      mpp += w * p * p;
    }
  }
  GaussianState s;
  s.mean_x = mx / m0;
  s.mean_p = mp / m0;
  s.cov_xx = mxx / m0 - s.mean_x * s.mean_x;
  s.cov_xp = mxp / m0 - s.mean_x * s.mean_p;
  s.cov_pp = mpp / m0 - s.mean_p * s.mean_p;
  return s;
}

double grid_purity(const PhaseSpaceGrid& g) {
  double sum = 0.0;
  for (double v : g.values()) sum += v * v;
  return 2.0 * pi * sum * g.dx() * g.dp();
}

double fourier_amplitude(const PhaseSpaceGrid& g, double kx, double kp) {
  std::vector<std::complex<double>> phase_p(g.np());
  for (std::size_t j = 0; j < g.np(); ++j) phase_p[j] = std::polar(1.0, -kp * g.p(j));
  std::complex<double> total = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    std::complex<double> row = 0.0;
    for (std::size_t j = 0; j < g.np(); ++j) row += g.at(i, j) * phase_p[j];
    total += row * std::polar(1.0, -kx * g.x(i));
  }
  return std::abs(total) * g.dx() * g.dp();
}

FringeProbe::FringeProbe(const CatWignerSpec& spec, const PhaseSpaceGrid& reference) {
  std::tie(kx_, kp_) = spec.fringe_wavevector();
  reference_ = fourier_amplitude(reference, kx_, kp_);
  if (!(reference_ > 0.0)) throw DomainError("reference state has no fringe component");
}

double FringeProbe::visibility(const PhaseSpaceGrid& grid) const {
  return fourier_amplitude(grid, kx_, kp_) / reference_;
}

double fringe_visibility(const PhaseSpaceGrid& grid, const CatWignerSpec& spec,
                         const PhaseSpaceGrid& reference) {
  return FringeProbe(spec, reference).visibility(grid);
}

TdFit measure_td(std::span<const double> times, std::span<const double> visibility,
                 const TdFitOptions& opts) {
  if (times.size() != visibility.size()) throw FitFailure("time and value series differ in length");
  std::vector<double> t;
  std::vector<double> y;
  bool hit_floor = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (visibility[i] > opts.floor) {
      t.push_back(times[i]);
      y.push_back(std::log(visibility[i]));
    } else {
      hit_floor = true;
    }
  }
  if (t.size() < 3) throw FitFailure("fewer than three samples above the floor");
  const double span = y.front() - *std::min_element(y.begin(), y.end());
  if (!hit_floor && span < opts.min_efoldings) {
    std::ostringstream msg;
    msg << "series spans only " << span << " e-foldings (need " << opts.min_efoldings << ")";
    throw FitFailure(msg.str());
  }
  const auto n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  const double intercept = (sy - slope * st) / n;
  const double mean_y = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - (intercept + slope * t[i]);
    ss_res += r * r;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  TdFit fit;
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  fit.points = t.size();
  fit.amplitude = std::exp(intercept);
  if (!(slope < 0.0)) throw FitFailure("visibility does not decay");
  fit.tau = -1.0 / slope;
  if (fit.r_squared < opts.min_r_squared) {
    std::ostringstream msg;
    msg << "exponential fit R^2 = " << fit.r_squared << " below " << opts.min_r_squared;
    throw FitFailure(msg.str());
  }
  return fit;
}

}  // namespace dce
