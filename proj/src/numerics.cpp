#include "rho/numerics.hpp"

#include <cmath>
#include <vector>

namespace rho {

namespace {

constexpr std::size_t kPairwiseBlock = 16;

double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= kPairwiseBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double trapezoid(std::span<const double> values, double spacing) {
  if (values.size() < 2) return 0.0;
  std::vector<double> weighted(values.begin(), values.end());
  weighted.front() *= 0.5;
  weighted.back() *= 0.5;
  return spacing * pairwise_sum(weighted);
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

}  // namespace rho
