#pragma once

// Hamiltonian models of a relativistic particle in one dimension.
//
// Everything here works in dimensionless variables:
//   Pi     = p / (m0 c)
//   eta    = Omega x / c     (quadratic models),  a x / c^2  (linear models),  x / L  (free)
//   lambda = Omega t         (quadratic models),  a t / c    (linear models),  c t / L (free)
// and energies are H / (m0 c^2). Physical units only enter through Scales.

#include <string_view>
#include <utility>

namespace rho {

enum class Model { Free, LinearScalar, LinearMass, QuadraticScalar, QuadraticMass };

std::string_view model_name(Model model);
/// Accepts the names produced by model_name ("quadratic-scalar", ...).
Model parse_model(std::string_view name);

bool is_linear(Model model);
bool is_quadratic(Model model);
/// True when H = T(Pi) + V(eta).
bool is_separable(Model model);

struct PhaseState {
  double eta = 0.0;
  double pi = 0.0;
  double lambda = 0.0;
};

struct PhysicalState {
  double x = 0.0;
  double p = 0.0;
  double t = 0.0;
};

/// Physical scales attached to a model. Only the fields relevant to the model are
/// validated: omega for quadratic models, accel for linear ones, length for Free.
struct Scales {
  double m0 = 1.0;
  double c = 1.0;
  double omega = 1.0;   // sqrt(k / m0)
  double accel = 1.0;   // F / m0
  double length = 1.0;  // reference length of the free model

  double spring_constant() const { return m0 * omega * omega; }
  double force() const { return m0 * accel; }
};

class Hamiltonian {
 public:
  /// Throws DomainError when the scales are invalid for the model (m0, c, omega,
  /// length must be positive; accel must be nonzero for linear models).
  explicit Hamiltonian(Model model, Scales scales = {});

  Model model() const { return model_; }
  const Scales& scales() const { return scales_; }

  /// H / (m0 c^2).
  double energy(double eta, double pi) const;
  /// d eta / d lambda = dH/dPi.
  double velocity(double eta, double pi) const;
  /// d Pi / d lambda = -dH/deta.
  double force(double eta, double pi) const;

  PhaseState to_dimensionless(const PhysicalState& s) const;
  PhysicalState to_physical(const PhaseState& s) const;

 private:
  double length_scale() const;  // x = eta * length_scale()
  double time_scale() const;    // t = lambda * time_scale()

  Model model_;
  Scales scales_;
};

struct Derivative {
  double deta = 0.0;
  double dpi = 0.0;
};

double hamiltonian_value(const Hamiltonian& h, const PhaseState& s);
Derivative eom_rhs(const Hamiltonian& h, const PhaseState& s);

/// Free particle: eta drifts with the constant velocity beta(Pi0).
PhaseState exact_free(const PhaseState& s0, double lambda);
/// Constant force, scalar potential: Pi = Pi0 + lambda, eta = eta0 + gamma(Pi) - gamma(Pi0).
PhaseState exact_linear_scalar(const PhaseState& s0, double lambda);
/// Uniformly accelerated (Newtonian) counterpart of exact_linear_scalar.
PhaseState nonrel_limit_linear(const PhaseState& s0, double lambda);

double lorentz_gamma(double pi);
double beta(double pi);

/// Amplitude data of the mass-redefined linear model. gamma0 is the conserved
/// H / (m0 c^2), delta = (1 - a x0 / c^2) / gamma0.
struct LinearMassAmplitude {
  double gamma0 = 1.0;
  double delta = 0.0;
  double x0_rot = 1.0;  // X0  = sqrt(1 - delta^2), signed like Pi0
  double x0_rot_prime = 0.0;  // X0' = delta
};

LinearMassAmplitude linear_mass_amplitude(double x0, double pi0, const Scales& scales);

/// Rotation of (X0, X0') by the phase xi. Throws DomainError when delta^2 > 1.
std::pair<double, double> linear_mass_rotation(double delta, double xi, double x0_rot_sign = 1.0);

struct LinearMassSolution {
  double gamma0 = 1.0;
  double delta = 0.0;
  double xi = 0.0;     // a t / (gamma0 c)
  double omega = 0.0;  // a / (gamma0 c)
  double x = 0.0;
  double rot = 0.0;        // X(xi)
  double rot_prime = 0.0;  // X'(xi)
};

/// Closed-form motion under H = sqrt((pc)^2 + (m0 c^2 - F x)^2).
LinearMassSolution exact_linear_mass(double x0, double pi0, const Scales& scales, double t);

}  // namespace rho
