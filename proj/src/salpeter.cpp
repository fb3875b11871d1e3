#include "rho/salpeter.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rho/numerics.hpp"

namespace rho {

namespace {

constexpr double kEdgeThreshold = 1e-6;      // |psi| on the edge band relative to max |psi|
constexpr double kAliasThreshold = 1e-10;    // spectral weight in the outer band
constexpr double kDecayThreshold = 1e-8;     // |f| at the sample ends relative to max |f|

Complex expi(double phase) { return {std::cos(phase), std::sin(phase)}; }

double sum_abs2(std::span<const Complex> v) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](Complex z) { return std::norm(z); });
  return pairwise_sum(a);
}

void check_state(const SpectralState& s) {
  s.grid.validate();
  if (s.psi.size() != s.grid.n) throw std::invalid_argument("spectral state: psi size != n");
}

// The outermost n/32 points on either side of the xi grid.
bool touches_edge(const SpectralState& s) {
  const std::size_t n = s.grid.n;
  const std::size_t band = std::max<std::size_t>(1, n / 32);
  double peak = 0.0, edge = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = std::abs(s.psi[j]);
    peak = std::max(peak, a);
    if (j < band || j >= n - band) edge = std::max(edge, a);
  }
  return peak > 0.0 && edge > kEdgeThreshold * peak;
}

// `spec` in FFT order; weight with |eta| above 90% of the band limit.
bool near_band_edge(const SpectralGrid& g, std::span<const Complex> spec) {
  const double cut = 0.9 * g.eta_max();
  std::vector<double> outer(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    outer[k] = std::abs(g.eta(k)) > cut ? std::norm(spec[k]) : 0.0;
  }
  const double total = sum_abs2(spec);
  return total > 0.0 && pairwise_sum(outer) > kAliasThreshold * total;
}

}  // namespace

void SpectralGrid::validate() const {
  if (n < 16 || !std::has_single_bit(n)) {
    throw DomainError("spectral grid needs a power-of-two point count >= 16");
  }
  if (!(std::isfinite(xi_min) && std::isfinite(xi_max) && xi_max > xi_min)) {
    throw DomainError("spectral grid needs finite xi_max > xi_min");
  }
}

double SpectralGrid::deta() const {
  return 2.0 * std::numbers::pi / (static_cast<double>(n) * dxi());
}

double SpectralGrid::eta(std::size_t k) const {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  return deta() * (k < n / 2 ? kk : kk - nn);
}

double SalpeterPotential::value(double xi) const {
  return kind == Kind::Linear ? -coefficient * xi : coefficient * xi * xi;
}

SpectralState gaussian_packet(const SpectralGrid& grid, double center, double width,
                              double momentum) {
  grid.validate();
  if (!(width > 0.0) || !std::isfinite(width)) throw DomainError("packet width must be positive");
  require_finite(center, "packet center");
  require_finite(momentum, "packet momentum");
  SpectralState s;
  s.grid = grid;
  s.psi.resize(grid.n);
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double d = grid.xi(j) - center;
    s.psi[j] = std::exp(-d * d / (4.0 * width * width)) * expi(momentum * grid.xi(j));
  }
  normalize(s);
  s.edge_warning = touches_edge(s);
  return s;
}

double norm(const SpectralState& s) {
  check_state(s);
  // Periodic trapezoid.
  return sum_abs2(s.psi) * s.grid.dxi();
}

void normalize(SpectralState& s) {
  const double n2 = norm(s);
  if (!(n2 > 0.0)) throw DomainError("cannot normalise a zero wavefunction");
  const double scale = 1.0 / std::sqrt(n2);
  for (auto& z : s.psi) z *= scale;
}

std::vector<Complex> spectrum(const SpectralState& s) {
  check_state(s);
  std::vector<Complex> out = s.psi;
  Fft fft(s.grid.n);
  fft.forward(out);
  const double scale = s.grid.dxi() / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] *= scale * expi(-s.grid.eta(k) * s.grid.xi_min);
  }
  return out;
}

std::vector<Complex> centered_spectrum(const SpectralState& s) {
  std::vector<Complex> spec = spectrum(s);
  std::rotate(spec.begin(), spec.begin() + static_cast<std::ptrdiff_t>(s.grid.n / 2), spec.end());
  return spec;
}

double linear_phase_integral(double eta, double a, double tau) {
  require_finite(eta, "eta");
  require_finite(a, "A");
  require_finite(tau, "tau");
  if (a == 0.0 || tau == 0.0) return tau * std::hypot(1.0, eta);
  // [g(x) - g(y)] / (2A) with g(u) = u sqrt(1+u^2) + asinh(u), x = eta, y = eta - A tau.
  const double x = eta;
  const double y = eta - a * tau;
  const double sx = std::hypot(1.0, x);
  const double sy = std::hypot(1.0, y);
  if (x * y <= 0.0) {
    return (x * sx - y * sy + std::asinh(x) - std::asinh(y)) / (2.0 * a);
  }
  // Same sign: factor out x - y = A tau so nothing cancels.
  const double sum = x + y;
  const double t1 = sum * (1.0 + x * x + y * y) / (x * sx + y * sy);
  const double z = a * tau * sum / (x * sy + y * sx);
  const double t2 = std::abs(z) < 1e-8 ? sum / (x * sy + y * sx) * (1.0 - z * z / 6.0)
                                        : std::asinh(z) / (a * tau);
  return 0.5 * tau * (t1 + t2);
}

SpectralState linear_exact_step(const SpectralState& s, double a, double tau) {
  check_state(s);
  require_finite(a, "A");
  require_finite(tau, "tau");
  const SpectralGrid& g = s.grid;
  SpectralState out = s;
  out.tau = s.tau + tau;
  const double shift = a * tau;
  if (shift != 0.0) {
    for (std::size_t j = 0; j < g.n; ++j) out.psi[j] *= expi(shift * g.xi(j));
  }
  Fft fft(g.n);
  fft.forward(out.psi);
  if (std::abs(shift) >= g.eta_max() || near_band_edge(g, out.psi)) out.aliasing_warning = true;
  for (std::size_t k = 0; k < g.n; ++k) {
    out.psi[k] *= expi(-linear_phase_integral(g.eta(k), a, tau));
  }
  fft.inverse(out.psi);
  if (touches_edge(out)) out.edge_warning = true;
  return out;
}

SpectralState potential_step(const SpectralState& s, double b, double dtau) {
  check_state(s);
  require_finite(b, "B");
  require_finite(dtau, "dtau");
  SpectralState out = s;
  for (std::size_t j = 0; j < s.grid.n; ++j) {
    const double xi = s.grid.xi(j);
    out.psi[j] *= expi(-b * xi * xi * dtau);
  }
  return out;
}

QuadraticSplitPropagator::QuadraticSplitPropagator(const SpectralGrid& grid, double b,
                                                   double dtau)
    : grid_(grid), b_(b), dtau_(dtau), fft_((grid.validate(), grid.n)) {
  require_finite(b, "B");
  if (!(dtau > 0.0) || !std::isfinite(dtau)) throw DomainError("dtau must be positive");
  half_kinetic_.resize(grid.n);
  full_kinetic_.resize(grid.n);
  potential_.resize(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) {
    const double w = std::hypot(1.0, grid.eta(k));
    half_kinetic_[k] = expi(-0.5 * dtau * w);
    full_kinetic_[k] = expi(-dtau * w);
    const double xi = grid.xi(k);
    potential_[k] = expi(-b * xi * xi * dtau);
  }
}

void QuadraticSplitPropagator::advance(SpectralState& s, std::size_t n_steps) {
  check_state(s);
  if (s.grid != grid_) throw std::invalid_argument("propagator grid does not match state");
  if (n_steps == 0) return;
  auto& psi = s.psi;
  auto apply = [&psi](const std::vector<Complex>& phase) {
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= phase[i];
  };
  fft_.forward(psi);
  apply(half_kinetic_);
  for (std::size_t n = 0; n < n_steps; ++n) {
    fft_.inverse(psi);
    apply(potential_);
    fft_.forward(psi);
    apply(n + 1 < n_steps ? full_kinetic_ : half_kinetic_);
  }
  if (near_band_edge(grid_, psi)) s.aliasing_warning = true;
  fft_.inverse(psi);
  s.tau += static_cast<double>(n_steps) * dtau_;
  if (touches_edge(s)) s.edge_warning = true;
}

SpectralState quadratic_split_step(const SpectralState& s, double b, double dtau) {
  QuadraticSplitPropagator prop(s.grid, b, dtau);
  SpectralState out = s;
  prop.advance(out, 1);
  return out;
}

namespace {

// C-infinity step: 1 for x >= 1, 0 for x <= 0.
double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double p = std::exp(-1.0 / x);
  const double q = std::exp(-1.0 / (1.0 - x));
  return p / (p + q);
}

}  // namespace

WeierstrassResult weierstrass_transform_quadrature(std::span<const Complex> f, double eta_min,
                                                   double deta, double a,
                                                   const WeierstrassOptions& options) {
  require_finite(a, "a");
  require_finite(eta_min, "eta_min");
  if (a == 0.0) throw DomainError("weierstrass transform needs a != 0");
  if (!(deta > 0.0) || !std::isfinite(deta)) throw DomainError("eta spacing must be positive");
  const std::size_t stencil = options.stencil;
  if (stencil < 2 || stencil % 2 != 0) throw DomainError("stencil must be even and >= 2");
  if (f.size() < stencil) throw DomainError("too few samples for the interpolation stencil");
  if (!(options.window > 0.0) || !(options.points_per_wave >= 2.0)) {
    throw DomainError("invalid quadrature options");
  }

  WeierstrassResult result;
  const auto m = static_cast<std::ptrdiff_t>(f.size());

  double peak = 0.0;
  for (Complex z : f) peak = std::max(peak, std::abs(z));
  const std::size_t ends = std::min<std::size_t>(4, f.size() / 2);
  for (std::size_t i = 0; i < ends; ++i) {
    if (std::abs(f[i]) > kDecayThreshold * peak ||
        std::abs(f[f.size() - 1 - i]) > kDecayThreshold * peak) {
      result.accuracy_warning = true;
    }
  }

  // sigma = eta + r u turns the kernel into exp(i s u^2) / sqrt(i pi s), s = sign(a).
  const double sgn = a > 0.0 ? 1.0 : -1.0;
  const double r = 2.0 * std::sqrt(std::abs(a));
  const Complex prefactor = 1.0 / std::sqrt(Complex(0.0, std::numbers::pi * sgn));
  const double u_window = options.window;
  const double u_max = 2.0 * u_window;
  const double du = 2.0 * std::numbers::pi / (options.points_per_wave * 2.0 * u_max);
  const auto n_half = static_cast<std::ptrdiff_t>(std::ceil(u_max / du));

  // The sample offset r u / deta does not depend on eta, so the quadrature sum
  // collapses onto a fixed set of weights per grid shift.
  const auto half = static_cast<std::ptrdiff_t>(stencil / 2);
  const auto max_shift = static_cast<std::ptrdiff_t>(std::ceil(r * u_max / deta)) + half + 1;
  std::vector<Complex> weight(static_cast<std::size_t>(2 * max_shift + 1), Complex{});
  std::vector<double> lag(stencil);
  for (std::ptrdiff_t q = -n_half; q <= n_half; ++q) {
    const double u = static_cast<double>(q) * du;
    const double w = smooth_step((u_max - std::abs(u)) / u_window);
    if (w == 0.0) continue;
    const Complex kernel = prefactor * expi(sgn * u * u) * (w * du);
    const double pos = r * u / deta;
    const double base = std::floor(pos);
    const double t = pos - base;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(stencil); ++i) {
      const double node_i = static_cast<double>(i - half + 1);
      double l = 1.0;
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(stencil); ++k) {
        if (k == i) continue;
        const double node_k = static_cast<double>(k - half + 1);
        l *= (t - node_k) / (node_i - node_k);
      }
      lag[static_cast<std::size_t>(i)] = l;
    }
    const auto b = static_cast<std::ptrdiff_t>(base);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(stencil); ++i) {
      const std::ptrdiff_t shift = b + i - half + 1;
      weight[static_cast<std::size_t>(shift + max_shift)] += kernel * lag[static_cast<std::size_t>(i)];
    }
  }

  result.values.assign(f.size(), Complex{});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    Complex acc{};
    const std::ptrdiff_t lo = std::max(-max_shift, -i);
    const std::ptrdiff_t hi = std::min(max_shift, m - 1 - i);
    for (std::ptrdiff_t sft = lo; sft <= hi; ++sft) {
      acc += weight[static_cast<std::size_t>(sft + max_shift)] * f[static_cast<std::size_t>(i + sft)];
    }
    result.values[static_cast<std::size_t>(i)] = acc;
  }
  return result;
}

Observables observables(const SpectralState& s, const SalpeterPotential& v) {
  check_state(s);
  const SpectralGrid& g = s.grid;
  const std::size_t n = g.n;
  std::vector<double> w(n), wx(n), wxx(n), wv(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double p = std::norm(s.psi[j]);
    const double xi = g.xi(j);
    w[j] = p;
    wx[j] = p * xi;
    wxx[j] = p * xi * xi;
    wv[j] = p * v.value(xi);
  }
  const std::vector<Complex> spec = spectrum(s);
  std::vector<double> sw(n), se(n), see(n), sk(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = std::norm(spec[k]);
    const double eta = g.eta(k);
    sw[k] = p;
    se[k] = p * eta;
    see[k] = p * eta * eta;
    sk[k] = p * std::hypot(1.0, eta);
  }
  Observables o;
  o.tau = s.tau;
  const double mass = pairwise_sum(w);
  const double smass = pairwise_sum(sw);
  o.norm = mass * g.dxi();
  o.spectral_norm = smass * g.deta();
  if (!(mass > 0.0)) return o;
  o.mean_xi = pairwise_sum(wx) / mass;
  o.width_xi = std::sqrt(std::max(0.0, pairwise_sum(wxx) / mass - o.mean_xi * o.mean_xi));
  o.potential = pairwise_sum(wv) / mass;
  o.mean_eta = pairwise_sum(se) / smass;
  o.width_eta = std::sqrt(std::max(0.0, pairwise_sum(see) / smass - o.mean_eta * o.mean_eta));
  o.kinetic = pairwise_sum(sk) / smass;
  o.energy = o.kinetic + o.potential;
  return o;
}

}  // namespace rho
