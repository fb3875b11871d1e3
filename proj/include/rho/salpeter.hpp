#pragma once

// Spectral propagation of the one-dimensional spinless Salpeter equation
//   i d/dtau Psi = [ sqrt(1 - d^2/dxi^2) + V(xi) ] Psi
// with V = -A xi (exact solution in momentum space) or V = B xi^2 (Strang
// splitting). Units with hbar = m = c = 1.
//
// Momentum-space convention: Psi~(eta) = (2 pi)^(-1/2) int dxi exp(-i eta xi) Psi(xi).

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "rho/fft.hpp"

namespace rho {

using Complex = std::complex<double>;

/// Periodic xi grid with n points (a power of two, >= 16). xi_j = xi_min + j dxi
/// for j < n; the conjugate eta grid is the DFT frequency set in FFT order.
struct SpectralGrid {
  std::size_t n = 2048;
  double xi_min = -40.0;
  double xi_max = 40.0;

  void validate() const;
  double dxi() const { return (xi_max - xi_min) / static_cast<double>(n); }
  double deta() const;
  double xi(std::size_t j) const { return xi_min + static_cast<double>(j) * dxi(); }
  /// Frequency of DFT bin k (negative for k >= n/2).
  double eta(std::size_t k) const;
  double eta_max() const { return deta() * static_cast<double>(n / 2); }

  bool operator==(const SpectralGrid&) const = default;
};

struct SpectralState {
  SpectralGrid grid;
  std::vector<Complex> psi;
  double tau = 0.0;
  /// Momentum content reached the band edge (shift beyond grid bandwidth).
  bool aliasing_warning = false;
  /// Wave packet reached the xi-grid edge.
  bool edge_warning = false;
};

/// Normalised packet |psi|^2 ~ exp(-(xi - center)^2 / (2 width^2)) moving with
/// mean momentum `momentum`.
SpectralState gaussian_packet(const SpectralGrid& grid, double center, double width,
                              double momentum = 0.0);

double norm(const SpectralState& s);
void normalize(SpectralState& s);

/// Psi~ at the DFT frequencies (FFT order), with the continuous normalisation.
std::vector<Complex> spectrum(const SpectralState& s);
/// Same samples reordered onto an increasing eta grid starting at -eta_max.
std::vector<Complex> centered_spectrum(const SpectralState& s);

struct SalpeterPotential {
  enum class Kind { Linear, Quadratic };
  Kind kind = Kind::Quadratic;
  double coefficient = 0.0;  // A for Linear (V = -A xi), B for Quadratic (V = B xi^2)

  static SalpeterPotential linear(double a) { return {Kind::Linear, a}; }
  static SalpeterPotential quadratic(double b) { return {Kind::Quadratic, b}; }
  double value(double xi) const;
};

/// int_0^tau dchi sqrt(1 + (eta - A chi)^2) in closed form.
double linear_phase_integral(double eta, double a, double tau);

/// Exact propagation over tau under V = -A xi: the spectrum is shifted by A tau
/// and picks up the phase exp(-i linear_phase_integral).
SpectralState linear_exact_step(const SpectralState& s, double a, double tau);

/// Multiplication by exp(-i B dtau xi^2) on the xi grid.
SpectralState potential_step(const SpectralState& s, double b, double dtau);

/// Strang propagator for V = B xi^2: half kinetic phase, potential phase, half
/// kinetic phase. Consecutive half phases are fused when advancing many steps.
class QuadraticSplitPropagator {
 public:
  QuadraticSplitPropagator(const SpectralGrid& grid, double b, double dtau);

  double dtau() const { return dtau_; }
  void advance(SpectralState& s, std::size_t n_steps);

 private:
  SpectralGrid grid_;
  double b_;
  double dtau_;
  Fft fft_;
  std::vector<Complex> half_kinetic_;
  std::vector<Complex> full_kinetic_;
  std::vector<Complex> potential_;
};

SpectralState quadratic_split_step(const SpectralState& s, double b, double dtau);

struct WeierstrassOptions {
  /// Integration runs over |u| <= 2 * window in the scaled variable
  /// sigma = eta + 2 sqrt(|a|) u, with a smooth taper beyond `window`.
  double window = 30.0;
  /// Points per 2 pi of the fastest kernel phase.
  double points_per_wave = 16.0;
  /// Interpolation stencil used to evaluate f between grid samples.
  std::size_t stencil = 12;
};

struct WeierstrassResult {
  std::vector<Complex> values;
  /// f does not decay at the grid edges, so truncating the integral is inaccurate.
  bool accuracy_warning = false;
};

/// Direct quadrature of
///   exp(i a d^2/deta^2) f(eta) = (2 sqrt(i pi a))^(-1) int dsigma exp(-(eta - sigma)^2 / (4 i a)) f(sigma)
/// for f sampled on the increasing grid eta_i = eta_min + i deta. Evaluated at
/// the sample points. Throws DomainError for a == 0.
WeierstrassResult weierstrass_transform_quadrature(std::span<const Complex> f, double eta_min,
                                                   double deta, double a,
                                                   const WeierstrassOptions& options = {});

struct Observables {
  double tau = 0.0;
  double norm = 0.0;
  double spectral_norm = 0.0;
  double mean_xi = 0.0;
  double mean_eta = 0.0;
  double width_xi = 0.0;
  double width_eta = 0.0;
  double kinetic = 0.0;    // <sqrt(1 + eta^2)>
  double potential = 0.0;  // <V(xi)>
  double energy = 0.0;
};

Observables observables(const SpectralState& s, const SalpeterPotential& v);

}  // namespace rho
