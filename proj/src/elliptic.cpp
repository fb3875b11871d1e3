#include "rho/elliptic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rho/numerics.hpp"
#include "rho/ode.hpp"

namespace rho {

namespace {

void require_parameter(double m, const char* who) {
  require_finite(m, "elliptic parameter");
  if (!(m < 1.0)) {
    throw DomainError(std::string(who) + ": parameter m must be < 1, got " + std::to_string(m));
  }
}

double agm(double a, double b) {
  for (int i = 0; i < 64; ++i) {
    const double an = 0.5 * (a + b);
    const double bn = std::sqrt(a * b);
    a = an;
    b = bn;
    if (std::abs(a - b) <= 2.0 * std::numeric_limits<double>::epsilon() * a) break;
  }
  return 0.5 * (a + b);
}

// A&S 16.4: descending Landen sequence for 0 < m < 1.
JacobiElliptic jacobi_positive(double u, double m) {
  constexpr int kMaxTerms = 32;
  std::array<double, kMaxTerms + 1> a{};
  std::array<double, kMaxTerms + 1> c{};
  a[0] = 1.0;
  double b = std::sqrt(1.0 - m);
  c[0] = std::sqrt(m);
  int n = 0;
  while (n < kMaxTerms && std::abs(c[n]) > std::numeric_limits<double>::epsilon() * a[n]) {
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(a[n] * u, n);
  double phi_prev = phi;
  for (int k = n; k > 0; --k) {
    phi_prev = phi;
    phi = 0.5 * (phi + std::asin(c[k] * std::sin(phi) / a[k]));
  }
  JacobiElliptic r;
  r.sn = std::sin(phi);
  r.cn = std::cos(phi);
  r.dn = n > 0 ? r.cn / std::cos(phi_prev - phi) : 1.0;
  return r;
}

}  // namespace

double elliptic_K(double m) {
  require_parameter(m, "elliptic_K");
  if (m < 0.0) {
    // Reciprocal-parameter transformation onto (0, 1).
    const double s = std::sqrt(1.0 - m);
    return elliptic_K(m / (m - 1.0)) / s;
  }
  return std::numbers::pi / (2.0 * agm(1.0, std::sqrt(1.0 - m)));
}

JacobiElliptic jacobi_elliptic(double u, double m) {
  require_parameter(m, "jacobi_elliptic");
  require_finite(u, "jacobi argument");
  if (m == 0.0) return {std::sin(u), std::cos(u), 1.0};
  if (m < 0.0) {
    // A&S 16.10: negative parameter mapped onto mu = -m / (1 - m) in (0, 1).
    const double s = std::sqrt(1.0 - m);
    const double mu = -m / (1.0 - m);
    const JacobiElliptic t = jacobi_positive(u * s, mu);
    return {t.sn / (s * t.dn), t.cn / t.dn, 1.0 / t.dn};
  }
  return jacobi_positive(u, m);
}

double jacobi_cn(double u, double m) { return jacobi_elliptic(u, m).cn; }

DuffingParams::DuffingParams(double pi0, double sigma)
    : pi0_(pi0), sigma_(sigma), parameter_(pi0 * pi0 / (2.0 * pi0 * pi0 - 4.0)) {}

DuffingParams DuffingParams::from_pi0(double pi0) {
  if (!(pi0 > 0.0 && pi0 < std::numbers::sqrt2)) {
    throw DomainError("Duffing amplitude Pi0 must lie in (0, sqrt(2)), got " + std::to_string(pi0));
  }
  return DuffingParams(pi0, std::sqrt(1.0 - 0.5 * pi0 * pi0));
}

DuffingParams DuffingParams::from_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) {
    throw DomainError("Duffing sigma must lie in (0, 1], got " + std::to_string(sigma));
  }
  return DuffingParams(std::sqrt(2.0 * (1.0 - sigma) * (1.0 + sigma)), sigma);
}

double duffing_solution(const DuffingParams& p, double lambda) {
  return p.pi0() * jacobi_cn(p.sigma() * lambda, p.parameter());
}

PeriodPair rel_period(double pi0, double omega) {
  if (!(omega > 0.0)) throw DomainError("rel_period: Omega must be positive");
  if (!(pi0 > 0.0 && pi0 < std::numbers::sqrt2)) {
    throw DomainError("rel_period: Duffing approximation needs Pi0 in (0, sqrt(2)), got " +
                      std::to_string(pi0));
  }
  const double p2 = pi0 * pi0;
  const double sigma = std::sqrt(1.0 - 0.5 * p2);
  PeriodPair t;
  t.elliptic = 4.0 / (omega * sigma) * elliptic_K(p2 / (2.0 * p2 - 4.0));
  t.expanded = 2.0 * std::numbers::pi / omega * (1.0 + 0.25 * p2 * (1.0 + 1.0 / (2.0 * p2 - 4.0)));
  return t;
}

Trajectory integrate_momentum_ode(double pi0, double dpi0, double lambda_max, double tol,
                                  std::span<const double> sample_lambdas) {
  if (!(tol > 0.0)) throw DomainError("integrate_momentum_ode: tolerance must be positive");
  if (!(lambda_max > 0.0)) throw DomainError("integrate_momentum_ode: lambda_max must be positive");
  require_finite(pi0, "pi0");
  require_finite(dpi0, "dpi0");

  auto rhs = [](double, const std::array<double, 2>& y) {
    return std::array<double, 2>{y[1], -y[0] / std::hypot(1.0, y[0])};
  };
  // Local errors accumulate roughly linearly in lambda; the per-step tolerance
  // is scaled so the energy invariant stays within tol over the whole run.
  ode::Options opt;
  opt.rtol = tol / std::max(1.0, lambda_max);
  opt.atol = opt.rtol;
  const auto sol = ode::integrate<2>(rhs, {pi0, dpi0}, 0.0, lambda_max, opt, sample_lambdas);

  Trajectory traj;
  traj.reserve(sol.t.size());
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    const double p = sol.y[i][0];
    const double dp = sol.y[i][1];
    traj.push_back({sol.t[i], -dp, p, std::hypot(1.0, p) + 0.5 * dp * dp});
  }
  return traj;
}

namespace {

// Root in [x[1], x[2]] of the interpolating polynomial through the given points.
double interpolated_root(std::span<const double> x, std::span<const double> y, double lo,
                         double hi) {
  auto poly = [&](double t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double w = y[i];
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (j != i) w *= (t - x[j]) / (x[i] - x[j]);
      }
      sum += w;
    }
    return sum;
  };
  double flo = poly(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = poly(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MeasuredPeriod measure_period(std::span<const double> lambda, std::span<const double> values) {
  if (lambda.size() != values.size()) {
    throw std::invalid_argument("measure_period: lambda and values differ in length");
  }
  const std::size_t n = values.size();
  std::vector<double> roots;
  std::vector<double> spread;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(values[k] < 0.0 && values[k + 1] >= 0.0)) continue;
    double root;
    double est;
    if (k >= 1 && k + 2 < n) {
      root = interpolated_root(lambda.subspan(k - 1, 4), values.subspan(k - 1, 4), lambda[k],
                               lambda[k + 1]);
      const double quad =
          interpolated_root(lambda.subspan(k - 1, 3), values.subspan(k - 1, 3), lambda[k],
                            lambda[k + 1]);
      est = std::abs(root - quad);
    } else {
      root = interpolated_root(lambda.subspan(k, 2), values.subspan(k, 2), lambda[k], lambda[k + 1]);
      est = lambda[k + 1] - lambda[k];
    }
    roots.push_back(root);
    spread.push_back(est);
  }
  if (roots.size() < 2) {
    throw std::invalid_argument("measure_period: fewer than two upward zero crossings");
  }
  const std::size_t cycles = roots.size() - 1;
  MeasuredPeriod out;
  out.crossings = roots.size();
  out.period = (roots.back() - roots.front()) / static_cast<double>(cycles);

  double var = 0.0;
  for (std::size_t i = 1; i < roots.size(); ++i) {
    const double d = roots[i] - roots[i - 1] - out.period;
    var += d * d;
  }
  const double stat = cycles > 1 ? std::sqrt(var / static_cast<double>(cycles - 1) /
                                             static_cast<double>(cycles))
                                 : 0.0;
  const double interp = (spread.front() + spread.back()) / static_cast<double>(cycles);
  out.uncertainty = std::hypot(stat, interp);
  return out;
}

MeasuredPeriod measure_period(const Trajectory& traj) {
  std::vector<double> lambda;
  std::vector<double> values;
  lambda.reserve(traj.size());
  values.reserve(traj.size());
  for (const auto& s : traj) {
    lambda.push_back(s.lambda);
    values.push_back(s.pi);
  }
  return measure_period(lambda, values);
}

}  // namespace rho
