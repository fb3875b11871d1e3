#pragma once

// Symmetric split-operator maps for the Hamiltonian models.
//
// One step of size h is the kick / drift / kick composition
//   P   = Pi  - (h/2) dH/deta (eta, P)
//   eta'= eta + (h/2) [dH/dPi (eta, P) + dH/dPi (eta', P)]
//   Pi' = P   - (h/2) dH/deta (eta', P)
// which is explicit for separable models and reduces there to the familiar
// half-kick / drift / half-kick. Forward steps use h = +dlambda, Liouville
// pullback steps use h = -dlambda; the scheme is symmetric, so the two are
// exact inverses of each other.

#include <cstddef>
#include <vector>

#include "rho/dynamics.hpp"

namespace rho {

enum class Direction { Forward, Pullback };

struct TrajectorySample {
  double lambda = 0.0;
  double eta = 0.0;
  double pi = 0.0;
  double energy = 0.0;
};

using Trajectory = std::vector<TrajectorySample>;

class SplitStepper {
 public:
  static constexpr double kDefaultStep = 5e-3;

  /// dlambda must be finite and >= 0 (zero gives the identity map).
  SplitStepper(Hamiltonian hamiltonian, double dlambda = kDefaultStep,
               Direction direction = Direction::Forward);

  const Hamiltonian& hamiltonian() const { return hamiltonian_; }
  double dlambda() const { return dlambda_; }
  Direction direction() const { return direction_; }

  /// One step in this stepper's direction. lambda advances by +dlambda for
  /// Forward and -dlambda for Pullback.
  PhaseState step(const PhaseState& s) const;

  SplitStepper reversed() const;

 private:
  Hamiltonian hamiltonian_;
  double dlambda_;
  Direction direction_;
};

/// Throws std::invalid_argument if the stepper is not a Pullback stepper.
PhaseState pullback_step(const SplitStepper& stepper, const PhaseState& s);
/// Throws std::invalid_argument if the stepper is not a Forward stepper.
PhaseState forward_step(const SplitStepper& stepper, const PhaseState& s);

/// n_steps + 1 samples with lambda_k = k * dlambda.
Trajectory evolve(const SplitStepper& stepper, const PhaseState& s0, std::size_t n_steps);

/// Determinant of the central-difference Jacobian of the n-step map.
double jacobian_fd(const SplitStepper& stepper, const PhaseState& s, double h = 1e-6,
                   std::size_t n_steps = 1);

}  // namespace rho
