#pragma once

// Complete elliptic integral K, Jacobi sn/cn/dn, and the Duffing approximation
// of the relativistic oscillator.
//
// Convention: every function takes the PARAMETER m (m = k^2 for modulus k),
// and m may be negative. K(m) = int_0^{pi/2} dtheta / sqrt(1 - m sin^2 theta).

#include <cstddef>
#include <span>

#include "rho/split.hpp"

namespace rho {

/// Requires m < 1.
double elliptic_K(double m);

struct JacobiElliptic {
  double sn = 0.0;
  double cn = 1.0;
  double dn = 1.0;
};

/// Requires m < 1.
JacobiElliptic jacobi_elliptic(double u, double m);
double jacobi_cn(double u, double m);

/// Duffing oscillator Pi'' = -Pi + Pi^3 / 2 started at rest with amplitude Pi0.
class DuffingParams {
 public:
  /// Requires 0 < pi0 < sqrt(2).
  static DuffingParams from_pi0(double pi0);
  /// Requires 0 < sigma <= 1.
  static DuffingParams from_sigma(double sigma);

  double pi0() const { return pi0_; }
  double sigma() const { return sigma_; }
  /// Elliptic parameter (sigma^2 - 1) / (2 sigma^2), always <= 0.
  double parameter() const { return parameter_; }

 private:
  DuffingParams(double pi0, double sigma);
  double pi0_;
  double sigma_;
  double parameter_;
};

double duffing_solution(const DuffingParams& p, double lambda);

struct PeriodPair {
  double elliptic = 0.0;  // 4 K(m) / (Omega sigma)
  double expanded = 0.0;  // lowest-order correction to 2 pi / Omega
};

/// Period of the Duffing approximation. Throws DomainError for pi0 outside (0, sqrt(2)).
PeriodPair rel_period(double pi0, double omega = 1.0);

/// Reference solution of Pi'' = -Pi / sqrt(1 + Pi^2) by adaptive Dormand-Prince
/// integration. Samples carry eta = -Pi' (the conjugate coordinate of the
/// quadratic-scalar model) and energy = sqrt(1 + Pi^2) + Pi'^2 / 2.
/// With an empty sample grid every accepted step is returned. `tol` bounds the
/// drift of the energy invariant over [0, lambda_max].
Trajectory integrate_momentum_ode(double pi0, double dpi0, double lambda_max, double tol = 1e-10,
                                  std::span<const double> sample_lambdas = {});

struct MeasuredPeriod {
  double period = 0.0;
  double uncertainty = 0.0;
  std::size_t crossings = 0;
};

/// Period of the momentum component from successive upward zero crossings,
/// each refined by cubic interpolation. Throws std::invalid_argument with
/// fewer than two crossings.
MeasuredPeriod measure_period(const Trajectory& traj);
MeasuredPeriod measure_period(std::span<const double> lambda, std::span<const double> values);

}  // namespace rho
