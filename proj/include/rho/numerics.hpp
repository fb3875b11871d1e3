#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace rho {

/// Thrown when an input lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Pairwise (cascade) summation. Fixed tree shape, so results do not depend on
// how the caller produced the input.
double pairwise_sum(std::span<const double> values);

/// Composite trapezoidal rule on uniformly spaced samples.
double trapezoid(std::span<const double> values, double spacing);

void require_finite(double value, const char* what);

}  // namespace rho
