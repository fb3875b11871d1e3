#include "rho/dynamics.hpp"

#include <cmath>
#include <string>

#include "rho/numerics.hpp"

namespace rho {

std::string_view model_name(Model model) {
  switch (model) {
    case Model::Free: return "free";
    case Model::LinearScalar: return "linear-scalar";
    case Model::LinearMass: return "linear-mass";
    case Model::QuadraticScalar: return "quadratic-scalar";
    case Model::QuadraticMass: return "quadratic-mass";
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  for (Model m : {Model::Free, Model::LinearScalar, Model::LinearMass, Model::QuadraticScalar,
                  Model::QuadraticMass}) {
    if (model_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown hamiltonian '" + std::string(name) +
                              "' (expected free, linear-scalar, linear-mass, quadratic-scalar, "
                              "quadratic-mass)");
}

bool is_linear(Model model) { return model == Model::LinearScalar || model == Model::LinearMass; }

bool is_quadratic(Model model) {
  return model == Model::QuadraticScalar || model == Model::QuadraticMass;
}

bool is_separable(Model model) {
  return model == Model::Free || model == Model::LinearScalar || model == Model::QuadraticScalar;
}

double lorentz_gamma(double pi) { return std::hypot(1.0, pi); }

double beta(double pi) { return pi / std::hypot(1.0, pi); }

Hamiltonian::Hamiltonian(Model model, Scales scales) : model_(model), scales_(scales) {
  auto positive = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw DomainError(std::string(name) + " must be positive and finite");
    }
  };
  positive(scales_.m0, "m0");
  positive(scales_.c, "c");
  if (is_quadratic(model_)) positive(scales_.omega, "omega");
  if (model_ == Model::Free) positive(scales_.length, "length");
  if (is_linear(model_)) {
    if (!std::isfinite(scales_.accel) || scales_.accel == 0.0) {
      throw DomainError("linear models need a nonzero acceleration; use the free model for a = 0");
    }
  }
}

double Hamiltonian::energy(double eta, double pi) const {
  switch (model_) {
    case Model::Free: return lorentz_gamma(pi);
    case Model::LinearScalar: return lorentz_gamma(pi) - eta;
    case Model::LinearMass: return std::hypot(pi, 1.0 - eta);
    case Model::QuadraticScalar: return lorentz_gamma(pi) + 0.5 * eta * eta;
    case Model::QuadraticMass: return std::hypot(pi, 1.0 + 0.5 * eta * eta);
  }
  return 0.0;
}

double Hamiltonian::velocity(double eta, double pi) const {
  switch (model_) {
    case Model::Free:
    case Model::LinearScalar:
    case Model::QuadraticScalar: return beta(pi);
    case Model::LinearMass:
    case Model::QuadraticMass: return pi / energy(eta, pi);
  }
  return 0.0;
}

double Hamiltonian::force(double eta, double pi) const {
  switch (model_) {
    case Model::Free: return 0.0;
    case Model::LinearScalar: return 1.0;
    case Model::LinearMass: return (1.0 - eta) / energy(eta, pi);
    case Model::QuadraticScalar: return -eta;
    case Model::QuadraticMass: return -eta * (1.0 + 0.5 * eta * eta) / energy(eta, pi);
  }
  return 0.0;
}

double Hamiltonian::length_scale() const {
  const double c = scales_.c;
  if (is_quadratic(model_)) return c / scales_.omega;
  if (is_linear(model_)) return c * c / scales_.accel;
  return scales_.length;
}

double Hamiltonian::time_scale() const {
  const double c = scales_.c;
  if (is_quadratic(model_)) return 1.0 / scales_.omega;
  if (is_linear(model_)) return c / scales_.accel;
  return scales_.length / c;
}

PhaseState Hamiltonian::to_dimensionless(const PhysicalState& s) const {
  return {s.x / length_scale(), s.p / (scales_.m0 * scales_.c), s.t / time_scale()};
}

PhysicalState Hamiltonian::to_physical(const PhaseState& s) const {
  return {s.eta * length_scale(), s.pi * scales_.m0 * scales_.c, s.lambda * time_scale()};
}

namespace {

void require_finite_state(const PhaseState& s) {
  require_finite(s.eta, "eta");
  require_finite(s.pi, "pi");
  require_finite(s.lambda, "lambda");
}

// gamma(b) - gamma(a) without cancellation.
double gamma_difference(double b, double a) {
  return (b - a) * (b + a) / (lorentz_gamma(b) + lorentz_gamma(a));
}

}  // namespace

double hamiltonian_value(const Hamiltonian& h, const PhaseState& s) {
  require_finite_state(s);
  return h.energy(s.eta, s.pi);
}

Derivative eom_rhs(const Hamiltonian& h, const PhaseState& s) {
  require_finite_state(s);
  return {h.velocity(s.eta, s.pi), h.force(s.eta, s.pi)};
}

PhaseState exact_free(const PhaseState& s0, double lambda) {
  return {s0.eta + lambda * beta(s0.pi), s0.pi, s0.lambda + lambda};
}

PhaseState exact_linear_scalar(const PhaseState& s0, double lambda) {
  const double pi = s0.pi + lambda;
  return {s0.eta + gamma_difference(pi, s0.pi), pi, s0.lambda + lambda};
}

PhaseState nonrel_limit_linear(const PhaseState& s0, double lambda) {
  const double pi = s0.pi + lambda;
  return {s0.eta + 0.5 * (pi - s0.pi) * (pi + s0.pi), pi, s0.lambda + lambda};
}

LinearMassAmplitude linear_mass_amplitude(double x0, double pi0, const Scales& scales) {
  require_finite(x0, "x0");
  require_finite(pi0, "pi0");
  const double c2 = scales.c * scales.c;
  const double mass_term = 1.0 - scales.accel * x0 / c2;
  const double gamma0 = std::hypot(pi0, mass_term);
  if (gamma0 == 0.0) {
    throw DomainError("linear-mass solution is degenerate: zero energy (Pi0 = 0 and a x0 = c^2)");
  }
  LinearMassAmplitude amp;
  amp.gamma0 = gamma0;
  amp.delta = mass_term / gamma0;
  amp.x0_rot = pi0 / gamma0;
  amp.x0_rot_prime = amp.delta;
  return amp;
}

std::pair<double, double> linear_mass_rotation(double delta, double xi, double x0_rot_sign) {
  if (!(delta * delta <= 1.0)) {
    throw DomainError("linear-mass rotation needs delta^2 <= 1, got delta = " +
                      std::to_string(delta));
  }
  const double x0 = std::copysign(std::sqrt((1.0 - delta) * (1.0 + delta)), x0_rot_sign);
  const double s = std::sin(xi);
  const double c = std::cos(xi);
  return {s * x0 - c * delta, c * x0 + s * delta};
}

LinearMassSolution exact_linear_mass(double x0, double pi0, const Scales& scales, double t) {
  require_finite(t, "t");
  if (!std::isfinite(scales.accel) || scales.accel == 0.0) {
    throw DomainError("linear-mass solution needs a nonzero acceleration");
  }
  const LinearMassAmplitude amp = linear_mass_amplitude(x0, pi0, scales);
  const double c = scales.c;
  const double a = scales.accel;

  LinearMassSolution sol;
  sol.gamma0 = amp.gamma0;
  sol.delta = amp.delta;
  sol.omega = a / (amp.gamma0 * c);
  sol.xi = sol.omega * t;
  const double s = std::sin(sol.xi);
  const double co = std::cos(sol.xi);
  sol.rot = s * amp.x0_rot - co * amp.x0_rot_prime;
  sol.rot_prime = co * amp.x0_rot + s * amp.x0_rot_prime;
  sol.x = (c * c / a) * (1.0 + amp.gamma0 * sol.rot);
  return sol;
}

}  // namespace rho
