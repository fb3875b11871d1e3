#include "rho/split.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rho/numerics.hpp"

namespace rho {

namespace {

// dV/deta for the separable models, where H = gamma(Pi) + V(eta).
double potential_slope(Model model, double eta) {
  switch (model) {
    case Model::LinearScalar: return -1.0;
    case Model::QuadraticScalar: return eta;
    default: return 0.0;
  }
}

PhaseState separable_step(Model model, const PhaseState& s, double h) {
  const double half = 0.5 * h;
  const double p_half = s.pi - half * potential_slope(model, s.eta);
  const double eta = s.eta + h * beta(p_half);
  const double pi = p_half - half * potential_slope(model, eta);
  return {eta, pi, s.lambda + h};
}

// Mass-redefined models: H = sqrt(Pi^2 + M(eta)^2).
struct MassProfile {
  Model model;
  double value(double eta) const {
    return model == Model::LinearMass ? 1.0 - eta : 1.0 + 0.5 * eta * eta;
  }
  double slope(double eta) const { return model == Model::LinearMass ? -1.0 : eta; }
};

constexpr int kMaxNewton = 64;

bool newton_converged(double delta, double x) {
  return std::abs(delta) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x));
}

[[noreturn]] void newton_failure(const char* stage) {
  throw std::runtime_error(std::string("split step: Newton iteration did not converge in ") + stage);
}

PhaseState mass_step(Model model, const PhaseState& s, double h) {
  const MassProfile mass{model};
  const double half = 0.5 * h;

  // P + half * M M' / sqrt(P^2 + M^2) = Pi, with M evaluated at the old eta.
  const double m0 = mass.value(s.eta);
  const double c = half * m0 * mass.slope(s.eta);
  const double m0sq = m0 * m0;
  double p = s.pi - c / std::sqrt(s.pi * s.pi + m0sq);
  for (int it = 0;; ++it) {
    const double r2 = p * p + m0sq;
    const double r = std::sqrt(r2);
    const double g = p + c / r - s.pi;
    const double dg = 1.0 - c * p / (r2 * r);
    const double dp = g / dg;
    p -= dp;
    if (newton_converged(dp, p)) break;
    if (it == kMaxNewton) newton_failure("the momentum half-kick");
  }

  // Y = eta + half * [v(eta, P) + v(Y, P)], v = P / sqrt(P^2 + M^2).
  const double v_old = p / std::sqrt(p * p + m0sq);
  double y = s.eta + h * v_old;
  for (int it = 0;; ++it) {
    const double my = mass.value(y);
    const double r2 = p * p + my * my;
    const double r = std::sqrt(r2);
    const double g = y - s.eta - half * (v_old + p / r);
    const double dg = 1.0 + half * p * my * mass.slope(y) / (r2 * r);
    const double dy = g / dg;
    y -= dy;
    if (newton_converged(dy, y)) break;
    if (it == kMaxNewton) newton_failure("the position drift");
  }

  const double my = mass.value(y);
  const double pi = p - half * my * mass.slope(y) / std::sqrt(p * p + my * my);
  return {y, pi, s.lambda + h};
}

PhaseState step_signed(const Hamiltonian& hamiltonian, const PhaseState& s, double h) {
  if (h == 0.0) return s;
  const Model model = hamiltonian.model();
  if (is_separable(model)) return separable_step(model, s, h);
  return mass_step(model, s, h);
}

}  // namespace

SplitStepper::SplitStepper(Hamiltonian hamiltonian, double dlambda, Direction direction)
    : hamiltonian_(hamiltonian), dlambda_(dlambda), direction_(direction) {
  if (!(std::isfinite(dlambda) && dlambda >= 0.0)) {
    throw DomainError("dlambda must be finite and non-negative");
  }
}

PhaseState SplitStepper::step(const PhaseState& s) const {
  const double h = direction_ == Direction::Forward ? dlambda_ : -dlambda_;
  return step_signed(hamiltonian_, s, h);
}

SplitStepper SplitStepper::reversed() const {
  return SplitStepper(hamiltonian_, dlambda_,
                      direction_ == Direction::Forward ? Direction::Pullback : Direction::Forward);
}

PhaseState pullback_step(const SplitStepper& stepper, const PhaseState& s) {
  if (stepper.direction() != Direction::Pullback) {
    throw std::invalid_argument("pullback_step needs a Pullback stepper");
  }
  return stepper.step(s);
}

PhaseState forward_step(const SplitStepper& stepper, const PhaseState& s) {
  if (stepper.direction() != Direction::Forward) {
    throw std::invalid_argument("forward_step needs a Forward stepper");
  }
  return stepper.step(s);
}

Trajectory evolve(const SplitStepper& stepper, const PhaseState& s0, std::size_t n_steps) {
  Trajectory traj;
  if (n_steps >= traj.max_size()) {
    throw std::length_error("evolve: requested sample count overflows");
  }
  traj.reserve(n_steps + 1);
  const Hamiltonian& h = stepper.hamiltonian();
  PhaseState s = s0;
  traj.push_back({0.0, s.eta, s.pi, hamiltonian_value(h, s)});
  for (std::size_t k = 1; k <= n_steps; ++k) {
    s = stepper.step(s);
    traj.push_back({static_cast<double>(k) * stepper.dlambda(), s.eta, s.pi, h.energy(s.eta, s.pi)});
  }
  return traj;
}

double jacobian_fd(const SplitStepper& stepper, const PhaseState& s, double h, std::size_t n_steps) {
  if (!(h > 0.0)) throw DomainError("jacobian_fd: stencil width must be positive");
  // Identity map; the stencil itself would only contribute rounding.
  if (stepper.dlambda() == 0.0 || n_steps == 0) return 1.0;
  auto map = [&](double eta, double pi) {
    PhaseState z{eta, pi, s.lambda};
    for (std::size_t k = 0; k < n_steps; ++k) z = stepper.step(z);
    return z;
  };
  const PhaseState ep = map(s.eta + h, s.pi);
  const PhaseState em = map(s.eta - h, s.pi);
  const PhaseState pp = map(s.eta, s.pi + h);
  const PhaseState pm = map(s.eta, s.pi - h);
  const double inv = 1.0 / (2.0 * h);
  const double a11 = (ep.eta - em.eta) * inv;
  const double a12 = (pp.eta - pm.eta) * inv;
  const double a21 = (ep.pi - em.pi) * inv;
  const double a22 = (pp.pi - pm.pi) * inv;
  return a11 * a22 - a12 * a21;
}

}  // namespace rho
