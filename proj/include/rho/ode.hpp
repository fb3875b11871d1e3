#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small autonomous or
// non-autonomous systems y' = f(t, y) with fixed dimension N.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rho::ode {

struct Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  double initial_step = 1e-3;
  double min_step = 1e-14;  // relative to the integration span
  std::size_t max_steps = 50'000'000;
};

class StepUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <std::size_t N>
struct Solution {
  std::vector<double> t;
  std::vector<std::array<double, N>> y;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

namespace detail {

// Dormand & Prince (1980) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace detail

/// Integrates from t0 to t1 (t1 > t0). With an empty `outputs` every accepted
/// step is recorded (t0 included); otherwise the solution is recorded exactly
/// at the requested, increasing output times, which the stepper lands on.
template <std::size_t N, class F>
Solution<N> integrate(F&& f, std::array<double, N> y, double t0, double t1, const Options& opt,
                      std::span<const double> outputs = {}) {
  using namespace detail;
  using State = std::array<double, N>;
  if (!(t1 > t0)) throw std::invalid_argument("ode::integrate: need t1 > t0");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) {
    throw std::invalid_argument("ode::integrate: tolerances must be positive");
  }

  auto axpy = [](const State& base, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State out = base;
    for (const auto& [coef, k] : terms) {
      for (std::size_t i = 0; i < N; ++i) out[i] += h * coef * (*k)[i];
    }
    return out;
  };

  Solution<N> sol;
  std::size_t next_out = 0;
  auto record = [&](double t, const State& s) {
    sol.t.push_back(t);
    sol.y.push_back(s);
  };
  if (outputs.empty()) {
    record(t0, y);
  } else {
    while (next_out < outputs.size() && outputs[next_out] <= t0) record(t0, y), ++next_out;
  }

  const double min_step = opt.min_step * std::max(1.0, std::abs(t1 - t0));
  double t = t0;
  double h_nominal = std::min(opt.initial_step, t1 - t0);
  State k1 = f(t, y);
  double err_prev = 1e-4;

  while (t < t1) {
    if (sol.accepted + sol.rejected >= opt.max_steps) {
      throw std::runtime_error("ode::integrate: step budget exhausted");
    }
    if (h_nominal < min_step) throw StepUnderflow("ode::integrate: step size underflow");
    double target = t1;
    if (!outputs.empty() && next_out < outputs.size()) target = std::min(target, outputs[next_out]);
    const bool lands = t + h_nominal >= target;
    const double h = lands ? target - t : h_nominal;

    const State k2 = f(t + c2 * h, axpy(y, h, {{a21, &k1}}));
    const State k3 = f(t + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
    const State k4 = f(t + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const State k5 = f(t + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const State k6 =
        f(t + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const State y_new = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const State k7 = f(t + h, y_new);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
      const double scale = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err = std::max(err, std::abs(e) / scale);
    }

    if (err <= 1.0) {
      t = lands ? target : t + h;
      y = y_new;
      k1 = k7;
      ++sol.accepted;
      if (outputs.empty()) {
        record(t, y);
      } else {
        while (next_out < outputs.size() && outputs[next_out] <= t) record(t, y), ++next_out;
      }
      // PI step-size controller (Hairer, Norsett & Wanner II.4). A step shortened
      // to hit an output time does not shrink the nominal step.
      const double e = std::max(err, 1e-10);
      const double fac = std::clamp(0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0),
                                    0.2, 5.0);
      err_prev = e;
      h_nominal = lands ? std::max(h_nominal, h * fac) : h * fac;
    } else {
      ++sol.rejected;
      h_nominal = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  return sol;
}

}  // namespace rho::ode
