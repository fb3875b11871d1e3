#pragma once

// Liouville evolution of a phase-space density on a uniform (eta, Pi) grid.
//
// The evolved density at a node is the initial density evaluated at the foot of
// the backward characteristic: rho_n(eta, Pi) = rho_0(pullback^n(eta, Pi)).
// No interpolation is involved, so the only discretisation errors are the
// splitting error of the map and the quadrature used for integrals.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rho/dynamics.hpp"

namespace rho {

struct Grid2D {
  double eta_min = -1.0;
  double eta_max = 1.0;
  std::size_t n_eta = 2;
  double pi_min = -1.0;
  double pi_max = 1.0;
  std::size_t n_pi = 2;

  /// Throws DomainError unless n >= 2 and max > min on both axes.
  void validate() const;
  double d_eta() const { return (eta_max - eta_min) / static_cast<double>(n_eta - 1); }
  double d_pi() const { return (pi_max - pi_min) / static_cast<double>(n_pi - 1); }
  double eta(std::size_t i) const { return eta_min + static_cast<double>(i) * d_eta(); }
  double pi(std::size_t j) const { return pi_min + static_cast<double>(j) * d_pi(); }
  std::size_t size() const { return n_eta * n_pi; }
  /// Row-major with eta as the slow index.
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_pi + j; }
  /// Same grid with every spacing halved.
  Grid2D refined() const;

  bool operator==(const Grid2D&) const = default;
};

struct GaussianParams {
  double eta_center = 0.0;
  double pi_center = 0.0;
  double sigma_eta = 0.5;
  double sigma_pi = 0.5;
  double correlation = 0.0;  // in (-1, 1)
};

class InitialDensity {
 public:
  /// Normalised bivariate Gaussian. Throws DomainError for non-positive widths
  /// or |correlation| >= 1.
  static InitialDensity gaussian(const GaussianParams& params = {});
  /// Arbitrary non-negative density; the caller is responsible for its normalisation.
  static InitialDensity custom(std::function<double(double, double)> fn, std::string description);

  double operator()(double eta, double pi) const { return fn_(eta, pi); }
  const std::optional<GaussianParams>& gaussian_params() const { return gaussian_; }
  const std::string& description() const { return description_; }

 private:
  InitialDensity(std::function<double(double, double)> fn, std::optional<GaussianParams> g,
                 std::string description);

  std::function<double(double, double)> fn_;
  std::optional<GaussianParams> gaussian_;
  std::string description_;
};

struct Provenance {
  Model model = Model::Free;
  double dlambda = 0.0;
  std::size_t step = 0;
  std::string initial;
};

struct DensityField {
  Grid2D grid;
  double lambda = 0.0;
  std::vector<double> values;
  Provenance provenance;
  /// Set when the density on the grid boundary exceeds the escape threshold,
  /// i.e. part of the mass has left the grid.
  bool boundary_warning = false;

  double at(std::size_t i, std::size_t j) const { return values[grid.index(i, j)]; }
};

struct EvolveOptions {
  /// Boundary density, relative to the field maximum, above which a snapshot
  /// is flagged.
  double escape_threshold = 1e-6;
};

/// One field per distinct entry of `schedule` (sorted ascending). Every entry
/// must lie in [0, n_steps].
std::vector<DensityField> evolve_density(const InitialDensity& rho0, const Hamiltonian& h,
                                         const Grid2D& grid, double dlambda, std::size_t n_steps,
                                         std::vector<std::size_t> schedule,
                                         const EvolveOptions& options = {});

/// Density sampled directly from a closed-form pullback (eta, Pi) -> foot point.
DensityField sample_pullback(const InitialDensity& rho0, const Grid2D& grid, double lambda,
                             const std::function<std::pair<double, double>(double, double)>& foot);

double total_mass(const DensityField& f);

struct Marginals {
  std::vector<double> eta;
  std::vector<double> spatial;  // S(eta) = int dPi rho
  std::vector<double> pi;
  std::vector<double> momentum;  // R(Pi) = int deta rho
};

Marginals marginals(const DensityField& f);

struct CurrentPair {
  double lambda = 0.0;
  std::vector<double> eta;
  std::vector<double> temporal;  // S(eta)
  std::vector<double> spatial;   // I(eta) = int dPi eta' rho
};

CurrentPair density_current(const DensityField& f, const Hamiltonian& h);

struct ContinuityResidual {
  double max_norm = 0.0;
  double l2_norm = 0.0;
};

/// Residual of d_eta I + d_lambda S = 0 at the middle of three snapshots spaced
/// by dlambda, using second-order central differences on interior nodes.
/// Throws std::invalid_argument for mismatched grids or sizes.
ContinuityResidual continuity_residual(std::span<const CurrentPair, 3> currents, double dlambda);
ContinuityResidual continuity_residual(std::span<const DensityField, 3> fields,
                                       const Hamiltonian& h, double dlambda);

struct Moments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Moments of a one-dimensional density sampled on a uniform grid (trapezoidal).
Moments distribution_moments(std::span<const double> coords, std::span<const double> values);

struct SampleMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double skewness_se = 0.0;
  double kurtosis_se = 0.0;
};

/// Sample skewness and excess kurtosis with their standard errors under
/// normality. Needs at least four samples.
SampleMoments sample_moments(std::span<const double> samples);

/// Particles drawn from a Gaussian initial density by a seeded generator.
std::vector<PhaseState> sample_gaussian(const GaussianParams& params, std::size_t count,
                                        unsigned long long seed);

}  // namespace rho
