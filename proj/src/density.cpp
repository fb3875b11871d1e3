#include "rho/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rho/numerics.hpp"
#include "rho/split.hpp"

namespace rho {

void Grid2D::validate() const {
  if (n_eta < 2 || n_pi < 2) throw DomainError("grid needs at least 2 nodes per axis");
  if (!(std::isfinite(eta_min) && std::isfinite(eta_max) && eta_max > eta_min)) {
    throw DomainError("grid needs finite eta_max > eta_min");
  }
  if (!(std::isfinite(pi_min) && std::isfinite(pi_max) && pi_max > pi_min)) {
    throw DomainError("grid needs finite pi_max > pi_min");
  }
}

Grid2D Grid2D::refined() const {
  Grid2D g = *this;
  g.n_eta = 2 * n_eta - 1;
  g.n_pi = 2 * n_pi - 1;
  return g;
}

InitialDensity::InitialDensity(std::function<double(double, double)> fn,
                               std::optional<GaussianParams> g, std::string description)
    : fn_(std::move(fn)), gaussian_(g), description_(std::move(description)) {}

InitialDensity InitialDensity::gaussian(const GaussianParams& p) {
  if (!(p.sigma_eta > 0.0 && p.sigma_pi > 0.0)) {
    throw DomainError("gaussian density needs positive widths");
  }
  if (!(std::abs(p.correlation) < 1.0)) {
    throw DomainError("gaussian density needs |correlation| < 1");
  }
  const double one_minus_r2 = 1.0 - p.correlation * p.correlation;
  const double norm =
      1.0 / (2.0 * std::numbers::pi * p.sigma_eta * p.sigma_pi * std::sqrt(one_minus_r2));
  auto fn = [p, norm, one_minus_r2](double eta, double pi) {
    const double u = (eta - p.eta_center) / p.sigma_eta;
    const double v = (pi - p.pi_center) / p.sigma_pi;
    const double q = (u * u - 2.0 * p.correlation * u * v + v * v) / one_minus_r2;
    return norm * std::exp(-0.5 * q);
  };
  std::ostringstream desc;
  desc.precision(12);
  desc << "gaussian eta_center=" << p.eta_center << " pi_center=" << p.pi_center
       << " sigma_eta=" << p.sigma_eta << " sigma_pi=" << p.sigma_pi
       << " correlation=" << p.correlation;
  return InitialDensity(fn, p, desc.str());
}

InitialDensity InitialDensity::custom(std::function<double(double, double)> fn,
                                      std::string description) {
  if (!fn) throw std::invalid_argument("custom density needs a callable");
  return InitialDensity(std::move(fn), std::nullopt, std::move(description));
}

namespace {

bool escapes(const DensityField& f, double threshold) {
  const Grid2D& g = f.grid;
  const double peak = *std::max_element(f.values.begin(), f.values.end());
  if (!(peak > 0.0)) return false;
  double edge = 0.0;
  for (std::size_t i = 0; i < g.n_eta; ++i) {
    edge = std::max({edge, f.at(i, 0), f.at(i, g.n_pi - 1)});
  }
  for (std::size_t j = 0; j < g.n_pi; ++j) {
    edge = std::max({edge, f.at(0, j), f.at(g.n_eta - 1, j)});
  }
  return edge > threshold * peak;
}

}  // namespace

std::vector<DensityField> evolve_density(const InitialDensity& rho0, const Hamiltonian& h,
                                         const Grid2D& grid, double dlambda, std::size_t n_steps,
                                         std::vector<std::size_t> schedule,
                                         const EvolveOptions& options) {
  grid.validate();
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());
  if (!schedule.empty() && schedule.back() > n_steps) {
    throw std::invalid_argument("snapshot schedule exceeds n_steps");
  }
  const SplitStepper stepper(h, dlambda, Direction::Pullback);

  std::vector<DensityField> out(schedule.size());
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    out[s].grid = grid;
    out[s].lambda = static_cast<double>(schedule[s]) * dlambda;
    out[s].values.assign(grid.size(), 0.0);
    out[s].provenance = {h.model(), dlambda, schedule[s], rho0.description()};
  }

  const auto n_nodes = static_cast<long long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long long node = 0; node < n_nodes; ++node) {
    const auto idx = static_cast<std::size_t>(node);
    PhaseState z{grid.eta(idx / grid.n_pi), grid.pi(idx % grid.n_pi), 0.0};
    std::size_t done = 0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
      for (; done < schedule[s]; ++done) z = stepper.step(z);
      out[s].values[idx] = rho0(z.eta, z.pi);
    }
  }

  for (auto& f : out) f.boundary_warning = escapes(f, options.escape_threshold);
  return out;
}

DensityField sample_pullback(const InitialDensity& rho0, const Grid2D& grid, double lambda,
                             const std::function<std::pair<double, double>(double, double)>& foot) {
  grid.validate();
  DensityField f;
  f.grid = grid;
  f.lambda = lambda;
  f.values.resize(grid.size());
  f.provenance.initial = rho0.description();
  for (std::size_t i = 0; i < grid.n_eta; ++i) {
    for (std::size_t j = 0; j < grid.n_pi; ++j) {
      const auto [eta, pi] = foot(grid.eta(i), grid.pi(j));
      f.values[grid.index(i, j)] = rho0(eta, pi);
    }
  }
  return f;
}

Marginals marginals(const DensityField& f) {
  const Grid2D& g = f.grid;
  Marginals m;
  m.eta.resize(g.n_eta);
  m.spatial.resize(g.n_eta);
  m.pi.resize(g.n_pi);
  m.momentum.resize(g.n_pi);
  for (std::size_t i = 0; i < g.n_eta; ++i) {
    m.eta[i] = g.eta(i);
    m.spatial[i] = trapezoid(std::span(f.values).subspan(g.index(i, 0), g.n_pi), g.d_pi());
  }
  std::vector<double> column(g.n_eta);
  for (std::size_t j = 0; j < g.n_pi; ++j) {
    for (std::size_t i = 0; i < g.n_eta; ++i) column[i] = f.at(i, j);
    m.pi[j] = g.pi(j);
    m.momentum[j] = trapezoid(column, g.d_eta());
  }
  return m;
}

double total_mass(const DensityField& f) {
  const Marginals m = marginals(f);
  return trapezoid(m.spatial, f.grid.d_eta());
}

CurrentPair density_current(const DensityField& f, const Hamiltonian& h) {
  const Grid2D& g = f.grid;
  CurrentPair c;
  c.lambda = f.lambda;
  c.eta.resize(g.n_eta);
  c.temporal.resize(g.n_eta);
  c.spatial.resize(g.n_eta);
  std::vector<double> flux(g.n_pi);
  for (std::size_t i = 0; i < g.n_eta; ++i) {
    const double eta = g.eta(i);
    const auto row = std::span(f.values).subspan(g.index(i, 0), g.n_pi);
    for (std::size_t j = 0; j < g.n_pi; ++j) flux[j] = h.velocity(eta, g.pi(j)) * row[j];
    c.eta[i] = eta;
    c.temporal[i] = trapezoid(row, g.d_pi());
    c.spatial[i] = trapezoid(flux, g.d_pi());
  }
  return c;
}

ContinuityResidual continuity_residual(std::span<const CurrentPair, 3> currents, double dlambda) {
  if (!(dlambda > 0.0)) throw std::invalid_argument("continuity_residual: dlambda must be positive");
  const std::size_t n = currents[1].eta.size();
  for (const auto& c : currents) {
    if (c.eta.size() != n || c.temporal.size() != n || c.spatial.size() != n || c.eta != currents[1].eta) {
      throw std::invalid_argument("continuity_residual: snapshots live on different grids");
    }
  }
  if (n < 3) throw std::invalid_argument("continuity_residual: need at least 3 eta nodes");
  const double d_eta = currents[1].eta[1] - currents[1].eta[0];

  ContinuityResidual r;
  std::vector<double> squares;
  squares.reserve(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dS = (currents[2].temporal[i] - currents[0].temporal[i]) / (2.0 * dlambda);
    const double dI = (currents[1].spatial[i + 1] - currents[1].spatial[i - 1]) / (2.0 * d_eta);
    const double res = dS + dI;
    r.max_norm = std::max(r.max_norm, std::abs(res));
    squares.push_back(res * res);
  }
  r.l2_norm = std::sqrt(pairwise_sum(squares) * d_eta);
  return r;
}

ContinuityResidual continuity_residual(std::span<const DensityField, 3> fields,
                                       const Hamiltonian& h, double dlambda) {
  if (!(fields[0].grid == fields[1].grid && fields[1].grid == fields[2].grid)) {
    throw std::invalid_argument("continuity_residual: snapshots live on different grids");
  }
  const std::array<CurrentPair, 3> currents{density_current(fields[0], h),
                                            density_current(fields[1], h),
                                            density_current(fields[2], h)};
  return continuity_residual(std::span<const CurrentPair, 3>(currents), dlambda);
}

Moments distribution_moments(std::span<const double> coords, std::span<const double> values) {
  if (coords.size() != values.size() || coords.size() < 2) {
    throw std::invalid_argument("distribution_moments: need matching samples, at least 2");
  }
  const double h = coords[1] - coords[0];
  const std::size_t n = values.size();
  std::vector<double> w(n);
  Moments m;
  m.mass = trapezoid(values, h);
  if (!(m.mass > 0.0)) throw DomainError("distribution_moments: distribution has no mass");
  for (std::size_t i = 0; i < n; ++i) w[i] = coords[i] * values[i];
  m.mean = trapezoid(w, h) / m.mass;
  auto central = [&](int k) {
    for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(coords[i] - m.mean, k) * values[i];
    return trapezoid(w, h) / m.mass;
  };
  m.variance = central(2);
  m.skewness = central(3) / std::pow(m.variance, 1.5);
  m.excess_kurtosis = central(4) / (m.variance * m.variance) - 3.0;
  return m;
}

SampleMoments sample_moments(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 4) throw std::invalid_argument("sample_moments: need at least 4 samples");
  const double nd = static_cast<double>(n);
  SampleMoments s;
  s.count = n;
  s.mean = pairwise_sum(samples) / nd;
  std::vector<double> p2(n), p3(n), p4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = samples[i] - s.mean;
    p2[i] = d * d;
    p3[i] = p2[i] * d;
    p4[i] = p2[i] * p2[i];
  }
  const double m2 = pairwise_sum(p2) / nd;
  const double m3 = pairwise_sum(p3) / nd;
  const double m4 = pairwise_sum(p4) / nd;
  s.variance = m2;
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  s.skewness_se = std::sqrt(6.0 * nd * (nd - 1.0) / ((nd - 2.0) * (nd + 1.0) * (nd + 3.0)));
  s.kurtosis_se = 2.0 * s.skewness_se * std::sqrt((nd * nd - 1.0) / ((nd - 3.0) * (nd + 5.0)));
  return s;
}

std::vector<PhaseState> sample_gaussian(const GaussianParams& p, std::size_t count,
                                        unsigned long long seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double r = p.correlation;
  const double r_perp = std::sqrt(1.0 - r * r);
  std::vector<PhaseState> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double z1 = normal(gen);
    const double z2 = normal(gen);
    out.push_back({p.eta_center + p.sigma_eta * z1, p.pi_center + p.sigma_pi * (r * z1 + r_perp * z2),
                   0.0});
  }
  return out;
}

}  // namespace rho
