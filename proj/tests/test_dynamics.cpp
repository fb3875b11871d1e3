#include <doctest.h>

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "rho/dynamics.hpp"
#include "rho/numerics.hpp"

using namespace rho;

namespace {

constexpr std::array kAllModels = {Model::Free, Model::LinearScalar, Model::LinearMass,
                                   Model::QuadraticScalar, Model::QuadraticMass};

Hamiltonian unit(Model m) { return Hamiltonian(m); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Integrates Hamilton's equations of a dimensionless model with an odeint
// Dormand-Prince pair; independent of the library's own integrator.
PhaseState integrate_hamilton(const Hamiltonian& h, PhaseState s, double lambda) {
  using State = std::array<double, 2>;
  State y{s.eta, s.pi};
  auto rhs = [&h](const State& x, State& dx, double) {
    dx[0] = h.velocity(x[0], x[1]);
    dx[1] = h.force(x[0], x[1]);
  };
  namespace odeint = boost::numeric::odeint;
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-13, 1e-13),
                             rhs, y, 0.0, lambda, 1e-3);
  return {y[0], y[1], s.lambda + lambda};
}

}  // namespace

TEST_CASE("model names round-trip and unknown names are rejected") {
  for (Model m : kAllModels) CHECK(parse_model(model_name(m)) == m);
  CHECK_THROWS_AS(parse_model("harmonic"), std::invalid_argument);
  CHECK(is_linear(Model::LinearMass));
  CHECK(is_quadratic(Model::QuadraticScalar));
  CHECK(is_separable(Model::QuadraticScalar));
  CHECK_FALSE(is_separable(Model::QuadraticMass));
  CHECK_FALSE(is_separable(Model::LinearMass));
}

TEST_CASE("hamiltonian values at reference points") {
  CHECK(hamiltonian_value(unit(Model::QuadraticScalar), {0.0, 0.0}) == 1.0);
  CHECK(hamiltonian_value(unit(Model::QuadraticMass), {0.0, 0.0}) == 1.0);
  CHECK(hamiltonian_value(unit(Model::QuadraticScalar), {1.0, 0.0}) == 1.5);
  CHECK(hamiltonian_value(unit(Model::QuadraticMass), {2.0, 0.0}) == doctest::Approx(3.0));
  CHECK(hamiltonian_value(unit(Model::LinearScalar), {0.5, 0.0}) == doctest::Approx(0.5));
  CHECK(hamiltonian_value(unit(Model::LinearMass), {0.25, 1.0}) == doctest::Approx(1.25));
  CHECK(hamiltonian_value(unit(Model::Free), {7.0, std::sqrt(3.0)}) == doctest::Approx(2.0));
}

TEST_CASE("non-finite states are domain errors") {
  for (Model m : kAllModels) {
    CHECK_THROWS_AS(hamiltonian_value(unit(m), {std::nan(""), 0.0}), DomainError);
    CHECK_THROWS_AS(eom_rhs(unit(m), {0.0, INFINITY}), DomainError);
  }
}

TEST_CASE("equations of motion at reference points") {
  auto d = eom_rhs(unit(Model::Free), {3.0, 0.0});
  CHECK(d.deta == 0.0);
  CHECK(d.dpi == 0.0);
  d = eom_rhs(unit(Model::QuadraticScalar), {0.0, 3.0});
  CHECK(d.deta == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-15));
  CHECK(d.dpi == 0.0);
  for (double eta : {-2.0, 0.0, 5.0}) {
    d = eom_rhs(unit(Model::LinearScalar), {eta, 0.0});
    CHECK(d.deta == 0.0);
    CHECK(d.dpi == 1.0);
  }
}

TEST_CASE("equations of motion are the gradients of the hamiltonian") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-6;
  for (Model m : kAllModels) {
    const Hamiltonian ham = unit(m);
    for (int k = 0; k < 50; ++k) {
      const PhaseState s{u(rng), u(rng)};
      if (m == Model::LinearMass && std::abs(1.0 - s.eta) < 0.2 && std::abs(s.pi) < 0.2) continue;
      const double dH_dpi = (ham.energy(s.eta, s.pi + h) - ham.energy(s.eta, s.pi - h)) / (2 * h);
      const double dH_deta = (ham.energy(s.eta + h, s.pi) - ham.energy(s.eta - h, s.pi)) / (2 * h);
      const Derivative d = eom_rhs(ham, s);
      CHECK(std::abs(d.deta - dH_dpi) < 1e-8);
      CHECK(std::abs(d.dpi + dH_deta) < 1e-8);
    }
  }
}

TEST_CASE("scale validation") {
  Scales s;
  s.m0 = 0.0;
  CHECK_THROWS_AS(Hamiltonian(Model::QuadraticScalar, s), DomainError);
  s = {};
  s.c = -1.0;
  CHECK_THROWS_AS(Hamiltonian(Model::Free, s), DomainError);
  s = {};
  s.omega = 0.0;
  CHECK_THROWS_AS(Hamiltonian(Model::QuadraticMass, s), DomainError);
  CHECK_NOTHROW(Hamiltonian(Model::LinearScalar, s));  // omega is irrelevant there
  s = {};
  s.accel = 0.0;
  CHECK_THROWS_AS(Hamiltonian(Model::LinearScalar, s), DomainError);
  CHECK_THROWS_AS(Hamiltonian(Model::LinearMass, s), DomainError);
  CHECK_NOTHROW(Hamiltonian(Model::Free, s));
  s = {};
  s.length = 0.0;
  CHECK_THROWS_AS(Hamiltonian(Model::Free, s), DomainError);
}

TEST_CASE("unit conversion round trip") {
  Scales s{9.109e-31, 2.998e8, 3.7e6, -4.2e13, 0.02};
  for (Model m : kAllModels) {
    const Hamiltonian h(m, s);
    const PhysicalState p{1.3e-3, 2.1e-22, 4.0e-7};
    const PhysicalState back = h.to_physical(h.to_dimensionless(p));
    CHECK(std::abs(back.x - p.x) <= 1e-14 * std::abs(p.x));
    CHECK(std::abs(back.p - p.p) <= 1e-14 * std::abs(p.p));
    CHECK(std::abs(back.t - p.t) <= 1e-14 * std::abs(p.t));
  }
  // The quadratic scaling: eta = Omega x / c, lambda = Omega t, Pi = p / (m0 c).
  const Hamiltonian q(Model::QuadraticScalar, s);
  const PhaseState d = q.to_dimensionless({1.0, 1.0, 1.0});
  CHECK(rel(d.eta, s.omega / s.c) < 1e-15);
  CHECK(rel(d.lambda, s.omega) < 1e-15);
  CHECK(std::abs(d.pi - 1.0 / (s.m0 * s.c)) <= 1e-15 * d.pi);
  // Linear scaling: eta = a x / c^2, lambda = a t / c.
  const Hamiltonian l(Model::LinearScalar, s);
  const PhaseState dl = l.to_dimensionless({1.0, 0.0, 1.0});
  CHECK(std::abs(dl.eta - s.accel / (s.c * s.c)) <= 1e-15 * std::abs(dl.eta));
  CHECK(std::abs(dl.lambda - s.accel / s.c) <= 1e-15 * std::abs(dl.lambda));
}

TEST_CASE("lorentz factor and velocity") {
  CHECK(lorentz_gamma(0.0) == 1.0);
  CHECK(lorentz_gamma(std::sqrt(3.0)) == doctest::Approx(2.0));
  CHECK(beta(1.0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::abs(beta(1e300)) <= 1.0);
}

TEST_CASE("exact free motion") {
  auto s = exact_free({2.0, 0.0}, 5.0);
  CHECK(s.eta == 2.0);
  CHECK(s.pi == 0.0);
  s = exact_free({0.0, 1e8}, 1.0);
  CHECK(std::abs(s.eta - 1.0) <= 1e-15);
  s = exact_free({0.0, 1.0}, std::sqrt(2.0));
  CHECK(s.eta == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.pi == 1.0);
  CHECK(s.lambda == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("exact motion in a linear scalar potential") {
  auto s = exact_linear_scalar({0.0, 0.0}, 1.0);
  CHECK(s.eta == doctest::Approx(0.4142136).epsilon(1e-7));
  CHECK(s.eta == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
  CHECK(s.pi == 1.0);
  s = exact_linear_scalar({0.0, 0.5}, 0.5);
  CHECK(s.eta == doctest::Approx(0.2961797).epsilon(1e-7));
  CHECK(s.pi == 1.0);
  const PhaseState s0{0.7, -1.3, 0.0};
  s = exact_linear_scalar(s0, 0.0);
  CHECK(s.eta == s0.eta);
  CHECK(s.pi == s0.pi);

  // Energy is conserved along the closed form.
  const Hamiltonian h = unit(Model::LinearScalar);
  for (double lam : {0.1, 1.0, 10.0, -3.0}) {
    const auto e = exact_linear_scalar(s0, lam);
    CHECK(rel(hamiltonian_value(h, e), hamiltonian_value(h, s0)) < 1e-12);
  }
  // And it agrees with direct integration of Hamilton's equations.
  const auto num = integrate_hamilton(h, s0, 2.5);
  const auto ex = exact_linear_scalar(s0, 2.5);
  CHECK(std::abs(num.eta - ex.eta) < 1e-10);
  CHECK(std::abs(num.pi - ex.pi) < 1e-10);
}

TEST_CASE("non-relativistic limit of the linear potential") {
  auto s = nonrel_limit_linear({0.0, 0.0}, 1.0);
  CHECK(s.eta == 0.5);
  CHECK(s.pi == 1.0);
  const PhaseState s0{0.3, 0.2, 0.0};
  s = nonrel_limit_linear(s0, 0.0);
  CHECK(s.eta == s0.eta);
  CHECK(s.pi == s0.pi);
  // Relative gap to the exact solution is bounded by lambda^2 (Taylor remainder).
  for (double lam : {1e-2, 5e-3, 1e-3}) {
    const double nr = nonrel_limit_linear({0.0, 0.0}, lam).eta;
    const double ex = exact_linear_scalar({0.0, 0.0}, lam).eta;
    const double gap = std::abs(ex - nr) / nr;
    CHECK(gap <= lam * lam);
    CHECK(gap >= 0.2 * lam * lam);  // and it really is second order
  }
}

TEST_CASE("linear-mass rotation coordinates stay on the unit circle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(-1.0, 1.0), ux(-20.0, 20.0);
  for (int k = 0; k < 100; ++k) {
    const double delta = ud(rng);
    const double xi = ux(rng);
    const auto [x, xp] = linear_mass_rotation(delta, xi);
    CHECK(std::abs(x * x + xp * xp - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(linear_mass_rotation(1.0001, 0.0), DomainError);
  CHECK_NOTHROW(linear_mass_rotation(1.0, 0.3));
}

TEST_CASE("linear-mass solution: initial condition and period") {
  Scales s;
  s.c = 2.0;
  s.accel = 0.8;
  for (double x0 : {-1.0, 0.0, 2.5}) {
    for (double pi0 : {-0.7, 0.0, 1.9}) {
      const auto at0 = exact_linear_mass(x0, pi0, s, 0.0);
      CHECK(std::abs(at0.x - x0) < 1e-12 * std::max(1.0, std::abs(x0)));
      CHECK(at0.xi == 0.0);
      const double period = 2.0 * std::numbers::pi / at0.omega;
      const auto full = exact_linear_mass(x0, pi0, s, period);
      CHECK(full.xi == doctest::Approx(2.0 * std::numbers::pi));
      CHECK(std::abs(full.x - x0) < 1e-12 * std::max(1.0, std::abs(x0)) * 10);
      CHECK(std::abs(at0.rot * at0.rot + at0.rot_prime * at0.rot_prime - 1.0) < 1e-12);
      CHECK(at0.omega == doctest::Approx(s.accel / (at0.gamma0 * s.c)));
    }
  }
  CHECK_THROWS_AS(exact_linear_mass(s.c * s.c / s.accel, 0.0, s, 1.0), DomainError);
  Scales zero = s;
  zero.accel = 0.0;
  CHECK_THROWS_AS(exact_linear_mass(0.0, 0.0, zero, 1.0), DomainError);
}

TEST_CASE("linear-mass solution matches integration of the dimensionless equations") {
  Scales s;
  s.c = 1.5;
  s.accel = 0.6;
  const Hamiltonian h(Model::LinearMass, s);
  for (auto [x0, pi0] : {std::pair{0.0, 0.0}, std::pair{0.4, 0.9}, std::pair{-2.0, -0.3}}) {
    const PhaseState d0 = h.to_dimensionless({x0, pi0 * s.m0 * s.c, 0.0});
    for (double t : {0.5, 3.0, 11.0}) {
      const PhaseState d = h.to_dimensionless({0.0, 0.0, t});
      const PhaseState num = integrate_hamilton(h, d0, d.lambda);
      const PhysicalState phys = h.to_physical(num);
      const auto ex = exact_linear_mass(x0, pi0, s, t);
      CHECK(std::abs(ex.x - phys.x) < 1e-9);
    }
  }
}

TEST_CASE("linear-mass dynamics equals a massless charge in a uniform magnetic field") {
  // H = c sqrt(p_x^2 + (p_y - qBx)^2) with canonical p_y = m0 c and qB = m0 a / c.
  // Integrate the Lorentz force on the kinetic momentum k = (k_x, k_y) directly.
  Scales s;
  s.c = 1.0;
  s.accel = 0.75;
  const double qb = s.m0 * s.accel / s.c;
  const double x0 = 0.3, pi0 = 0.6;
  using State = std::array<double, 4>;  // x, y, k_x, k_y
  State y{x0, 0.0, pi0 * s.m0 * s.c, s.m0 * s.c - qb * x0};
  auto lorentz = [&](const State& z, State& dz, double) {
    const double kn = std::hypot(z[2], z[3]);
    const double vx = s.c * z[2] / kn, vy = s.c * z[3] / kn;  // |v| = c for m = 0
    dz[0] = vx;
    dz[1] = vy;
    dz[2] = qb * vy;   // q (v x B)_x
    dz[3] = -qb * vx;  // q (v x B)_y
  };
  namespace odeint = boost::numeric::odeint;
  double t_prev = 0.0;
  for (double t : {1.0, 4.0, 9.0, 20.0}) {
    odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-13, 1e-13),
                               lorentz, y, t_prev, t, 1e-3);
    t_prev = t;
    CHECK(std::abs(exact_linear_mass(x0, pi0, s, t).x - y[0]) < 1e-9);
  }
}

TEST_CASE("linear-mass solution reduces to uniform acceleration at early times") {
  Scales s;  // x0 = 0, Pi0 = 0: gamma0 = 1, eta = 1 - cos(lambda)
  const double c0 = [] {
    const double xi = 1e-2;
    const double x = exact_linear_mass(0.0, 0.0, Scales{}, xi).x;
    return std::abs(x - 0.5 * xi * xi) / (0.5 * xi * xi) / (xi * xi);
  }();
  CHECK(c0 == doctest::Approx(1.0 / 12.0).epsilon(1e-3));
  for (double xi : {3e-2, 1e-2, 3e-3}) {
    const double x = exact_linear_mass(0.0, 0.0, s, xi).x;
    const double dev = std::abs(x - 0.5 * xi * xi) / (0.5 * xi * xi);
    CHECK(dev <= 0.1 * xi * xi);
  }
}
