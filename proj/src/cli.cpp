#include "rho/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "rho/elliptic.hpp"
#include "rho/io.hpp"
#include "rho/numerics.hpp"
#include "rho/split.hpp"

namespace rho::cli {

namespace {

constexpr double kElectronRestKeV = 510.99895;

constexpr std::array kCommands = {Command::Trajectory, Command::Density, Command::Current,
                                  Command::Period,     Command::Salpeter, Command::Convergence};

unsigned bit(Command c) { return 1u << static_cast<unsigned>(c); }
constexpr unsigned kTraj = 1u << 0, kDens = 1u << 1, kCurr = 1u << 2, kPeriod = 1u << 3,
                   kSalp = 1u << 4, kConv = 1u << 5, kAll = 0x3f;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const std::string t = trim(s);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw UsageError("key '" + key + "': expected a finite number, got '" + s + "'");
  }
  return v;
}

unsigned long long to_unsigned(const std::string& key, const std::string& s) {
  unsigned long long v = 0;
  const std::string t = trim(s);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw UsageError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

bool classical(const RunConfig& c) {
  if (c.command == Command::Salpeter) return false;
  return c.command != Command::Convergence || c.target == ConvergenceTarget::Split;
}
bool spectral_run(const RunConfig& c) {
  return c.command == Command::Salpeter ||
         (c.command == Command::Convergence && c.target == ConvergenceTarget::Salpeter);
}
bool model_is(const RunConfig& c, bool (*pred)(Model)) {
  return c.hamiltonian && pred(*c.hamiltonian);
}
bool is_free(Model m) { return m == Model::Free; }

struct KeySpec {
  std::string name;
  std::string help;
  unsigned commands;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  // Whether the key means anything given the rest of the configuration.
  std::function<bool(const RunConfig&)> applies;
};

template <class Ref>
KeySpec real_key(std::string name, std::string help, unsigned commands, Ref ref,
                 std::function<bool(const RunConfig&)> applies = {}) {
  auto n = name;
  return {std::move(name), std::move(help), commands,
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_double(n, v); },
          [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); },
          std::move(applies)};
}

template <class Ref>
KeySpec count_key(std::string name, std::string help, unsigned commands, Ref ref,
                  std::function<bool(const RunConfig&)> applies = {}) {
  auto n = name;
  return {std::move(name), std::move(help), commands,
          [ref, n](RunConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_unsigned(n, v));
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          std::move(applies)};
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> k;
    k.push_back({"hamiltonian",
                 "free | linear-scalar | linear-mass | quadratic-scalar | quadratic-mass",
                 kTraj | kDens | kCurr | kConv,
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.hamiltonian = parse_model(trim(v));
                   } catch (const std::invalid_argument&) {
                     throw UsageError("key 'hamiltonian': unknown model '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return c.hamiltonian ? std::string(model_name(*c.hamiltonian)) : std::string();
                 },
                 classical});
    const unsigned phys = kTraj | kDens | kCurr | kConv;
    k.push_back(real_key("m0", "rest mass", phys, [](RunConfig& c) -> double& { return c.scales.m0; },
                         classical));
    k.push_back(real_key("c", "speed of light", phys,
                         [](RunConfig& c) -> double& { return c.scales.c; }, classical));
    k.push_back(real_key(
        "omega", "oscillator angular frequency (quadratic models)", phys | kPeriod,
        [](RunConfig& c) -> double& { return c.scales.omega; }, [](const RunConfig& c) {
          return c.command == Command::Period || (classical(c) && model_is(c, is_quadratic));
        }));
    k.push_back(real_key("accel", "force per rest mass (linear models)", phys,
                         [](RunConfig& c) -> double& { return c.scales.accel; },
                         [](const RunConfig& c) { return classical(c) && model_is(c, is_linear); }));
    k.push_back(real_key("length", "reference length (free model)", phys,
                         [](RunConfig& c) -> double& { return c.scales.length; },
                         [](const RunConfig& c) { return classical(c) && model_is(c, is_free); }));
    k.push_back(real_key("eta0", "initial eta", kTraj | kConv,
                         [](RunConfig& c) -> double& { return c.eta0; }, classical));
    k.push_back(real_key("pi0", "initial momentum Pi0", kTraj | kConv | kPeriod,
                         [](RunConfig& c) -> double& { return c.pi0; }, classical));
    k.push_back(real_key("dlambda", "split step in lambda", kTraj | kDens | kCurr | kPeriod,
                         [](RunConfig& c) -> double& { return c.dlambda; }));
    k.push_back(count_key("steps", "number of steps", kTraj | kSalp,
                          [](RunConfig& c) -> std::size_t& { return c.steps; }));
    k.push_back({"snapshots", "comma-separated step indices", kDens | kCurr,
                 [](RunConfig& c, const std::string& v) {
                   c.snapshots.clear();
                   for (const auto& s : split_list(v)) {
                     c.snapshots.push_back(static_cast<std::size_t>(to_unsigned("snapshots", s)));
                   }
                 },
                 [](const RunConfig& c) {
                   return join(c.snapshots, [](std::size_t n) { return std::to_string(n); });
                 },
                 {}});
    const unsigned field = kDens | kCurr;
    k.push_back(real_key("eta_min", "grid lower eta", field,
                         [](RunConfig& c) -> double& { return c.grid.eta_min; }));
    k.push_back(real_key("eta_max", "grid upper eta", field,
                         [](RunConfig& c) -> double& { return c.grid.eta_max; }));
    k.push_back(count_key("n_eta", "grid nodes along eta", field,
                          [](RunConfig& c) -> std::size_t& { return c.grid.n_eta; }));
    k.push_back(real_key("pi_min", "grid lower Pi", field,
                         [](RunConfig& c) -> double& { return c.grid.pi_min; }));
    k.push_back(real_key("pi_max", "grid upper Pi", field,
                         [](RunConfig& c) -> double& { return c.grid.pi_max; }));
    k.push_back(count_key("n_pi", "grid nodes along Pi", field,
                          [](RunConfig& c) -> std::size_t& { return c.grid.n_pi; }));
    k.push_back(real_key("eta_center", "initial Gaussian centre in eta", field,
                         [](RunConfig& c) -> double& { return c.initial.eta_center; }));
    k.push_back(real_key("pi_center", "initial Gaussian centre in Pi", field,
                         [](RunConfig& c) -> double& { return c.initial.pi_center; }));
    k.push_back(real_key("sigma_eta", "initial Gaussian width in eta", field,
                         [](RunConfig& c) -> double& { return c.initial.sigma_eta; }));
    k.push_back(real_key("sigma_pi", "initial Gaussian width in Pi", field,
                         [](RunConfig& c) -> double& { return c.initial.sigma_pi; }));
    k.push_back(real_key("correlation", "initial Gaussian correlation", field,
                         [](RunConfig& c) -> double& { return c.initial.correlation; }));
    k.push_back(count_key("samples", "particles for sampled moment errors (0 disables)", kDens,
                          [](RunConfig& c) -> std::size_t& { return c.samples; }));
    k.push_back(count_key("seed", "random seed for sampled diagnostics", kDens,
                          [](RunConfig& c) -> unsigned long long& { return c.seed; }));
    k.push_back(real_key("lambda_max", "integration length in lambda", kPeriod,
                         [](RunConfig& c) -> double& { return c.lambda_max; }));
    k.push_back(real_key("tol", "ODE oracle tolerance", kPeriod,
                         [](RunConfig& c) -> double& { return c.tol; }));
    k.push_back({"potential", "linear | quadratic", kSalp,
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "linear") {
                     c.potential.kind = SalpeterPotential::Kind::Linear;
                   } else if (t == "quadratic") {
                     c.potential.kind = SalpeterPotential::Kind::Quadratic;
                   } else {
                     throw UsageError("key 'potential': expected linear or quadratic, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.potential.kind == SalpeterPotential::Kind::Linear ? "linear"
                                                                                          : "quadratic");
                 },
                 {}});
    auto is_lin = [](const RunConfig& c) {
      return c.command == Command::Salpeter && c.potential.kind == SalpeterPotential::Kind::Linear;
    };
    k.push_back(real_key("slope", "A of V = -A xi (linear potential)", kSalp,
                         [](RunConfig& c) -> double& { return c.potential.coefficient; }, is_lin));
    k.push_back(real_key("curvature", "B of V = B xi^2 (quadratic potential)", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.potential.coefficient; },
                         [is_lin](const RunConfig& c) { return spectral_run(c) && !is_lin(c); }));
    k.push_back(real_key("dtau", "time step in tau", kSalp,
                         [](RunConfig& c) -> double& { return c.dtau; }));
    k.push_back(count_key("n_points", "xi grid points (power of two)", kSalp | kConv,
                          [](RunConfig& c) -> std::size_t& { return c.spectral.n; }, spectral_run));
    k.push_back(real_key("xi_min", "xi grid lower end", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.spectral.xi_min; }, spectral_run));
    k.push_back(real_key("xi_max", "xi grid upper end", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.spectral.xi_max; }, spectral_run));
    k.push_back(real_key("center", "packet centre in xi", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.packet_center; }, spectral_run));
    k.push_back(real_key("width", "packet width in xi", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.packet_width; }, spectral_run));
    k.push_back(real_key("momentum", "packet mean momentum", kSalp | kConv,
                         [](RunConfig& c) -> double& { return c.packet_momentum; }, spectral_run));
    k.push_back(count_key("observe_every", "steps between observable rows", kSalp,
                          [](RunConfig& c) -> std::size_t& { return c.observe_every; }));
    k.push_back(count_key("snapshot_every", "steps between snapshots (0: first and last only)",
                          kSalp, [](RunConfig& c) -> std::size_t& { return c.snapshot_every; }));
    k.push_back({"target", "split | salpeter", kConv,
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "split") {
                     c.target = ConvergenceTarget::Split;
                   } else if (t == "salpeter") {
                     c.target = ConvergenceTarget::Salpeter;
                   } else {
                     throw UsageError("key 'target': expected split or salpeter, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.target == ConvergenceTarget::Split ? "split" : "salpeter");
                 },
                 {}});
    k.push_back({"step_sizes", "comma-separated step sizes", kConv,
                 [](RunConfig& c, const std::string& v) {
                   c.step_sizes.clear();
                   for (const auto& s : split_list(v)) c.step_sizes.push_back(to_double("step_sizes", s));
                 },
                 [](const RunConfig& c) { return join(c.step_sizes, fmt); },
                 {}});
    k.push_back(real_key("lambda_end", "end time of the convergence runs", kConv,
                         [](RunConfig& c) -> double& { return c.lambda_end; }));
    k.push_back({"output", "output directory", kAll,
                 [](RunConfig& c, const std::string& v) { c.output = trim(v); },
                 [](const RunConfig& c) { return c.output.string(); },
                 {}});
    return k;
  }();
  return table;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

bool applies(const KeySpec& k, const RunConfig& c) {
  return (k.commands & bit(c.command)) && (!k.applies || k.applies(c));
}

std::string inapplicable_reason(const RunConfig& c) {
  if (c.command == Command::Convergence) {
    return std::string("convergence target '") +
           (c.target == ConvergenceTarget::Split ? "split" : "salpeter") + "'";
  }
  if (c.command == Command::Salpeter) {
    return std::string("potential '") +
           (c.potential.kind == SalpeterPotential::Kind::Linear ? "linear" : "quadratic") + "'";
  }
  if (c.hamiltonian) return "hamiltonian '" + std::string(model_name(*c.hamiltonian)) + "'";
  return "command '" + std::string(command_name(c.command)) + "'";
}

// Bounding box of the energy contour through the outermost point of the 6-sigma
// box, for the bounded (quadratic) models; the plain 6-sigma box otherwise.
Grid2D auto_grid(const RunConfig& c) {
  const auto& p = c.initial;
  Grid2D g = c.grid;
  double eta_half = 6.0 * p.sigma_eta;
  double pi_half = 6.0 * p.sigma_pi;
  double eta_mid = p.eta_center;
  double pi_mid = p.pi_center;
  if (c.hamiltonian && is_quadratic(*c.hamiltonian)) {
    const Hamiltonian h(*c.hamiltonian, c.scales);
    const double e_max = std::max({h.energy(p.eta_center + eta_half, p.pi_center),
                                   h.energy(p.eta_center - eta_half, p.pi_center),
                                   h.energy(p.eta_center, p.pi_center + pi_half),
                                   h.energy(p.eta_center, p.pi_center - pi_half)});
    // Both quadratic models have E(eta, 0) = 1 + eta^2 / 2 and E(0, Pi) = sqrt(1 + Pi^2).
    eta_half = std::sqrt(2.0 * (e_max - 1.0));
    pi_half = std::sqrt(e_max * e_max - 1.0);
    eta_mid = 0.0;
    pi_mid = 0.0;
  }
  auto fill = [&c](const char* key, double& slot, double value) {
    if (!c.explicit_keys.count(key)) slot = value;
  };
  fill("eta_min", g.eta_min, eta_mid - eta_half);
  fill("eta_max", g.eta_max, eta_mid + eta_half);
  fill("pi_min", g.pi_min, pi_mid - pi_half);
  fill("pi_max", g.pi_max, pi_mid + pi_half);
  return g;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void finalize(RunConfig& c) {
  for (const auto& key : c.explicit_keys) {
    const KeySpec* k = find_key(key);
    if (!applies(*k, c)) {
      throw UsageError("key '" + key + "' does not apply to " + inapplicable_reason(c));
    }
  }
  if (classical(c) && c.command != Command::Period) {
    require(c.hamiltonian.has_value(), "missing required key 'hamiltonian'");
    try {
      Hamiltonian(*c.hamiltonian, c.scales);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  switch (c.command) {
    case Command::Trajectory:
      require(c.dlambda > 0.0, "dlambda must be positive");
      break;
    case Command::Density:
    case Command::Current:
      require(c.dlambda > 0.0, "dlambda must be positive");
      require(!c.snapshots.empty(), "snapshots must not be empty");
      if (c.command == Command::Current) {
        for (auto n : c.snapshots) require(n >= 1, "current snapshots must be >= 1");
      }
      std::sort(c.snapshots.begin(), c.snapshots.end());
      c.snapshots.erase(std::unique(c.snapshots.begin(), c.snapshots.end()), c.snapshots.end());
      try {
        InitialDensity::gaussian(c.initial);
        c.grid = auto_grid(c);
        c.grid.validate();
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
      break;
    case Command::Period:
      require(c.pi0 > 0.0 && c.pi0 < std::numbers::sqrt2, "pi0 must lie in (0, sqrt 2)");
      require(c.scales.omega > 0.0, "omega must be positive");
      require(c.dlambda > 0.0, "dlambda must be positive");
      require(c.lambda_max > 0.0, "lambda_max must be positive");
      require(c.tol > 0.0, "tol must be positive");
      break;
    case Command::Salpeter:
      require(c.dtau > 0.0, "dtau must be positive");
      break;
    case Command::Convergence:
      if (c.target == ConvergenceTarget::Salpeter && !c.explicit_keys.count("step_sizes")) {
        c.step_sizes = {0.1, 0.05, 0.025};
      }
      require(c.step_sizes.size() >= 2, "step_sizes needs at least two entries");
      require(c.lambda_end > 0.0, "lambda_end must be positive");
      for (double h : c.step_sizes) {
        require(h > 0.0, "step sizes must be positive");
        const double n = c.lambda_end / h;
        require(std::abs(n - std::round(n)) < 1e-9 * n,
                "lambda_end must be a whole multiple of every step size");
      }
      break;
  }
  if (spectral_run(c)) {
    try {
      c.spectral.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    require(c.packet_width > 0.0, "width must be positive");
  }
}

struct HelpRequested {
  std::string text;
};

// Tracks written files so a failed run leaves nothing behind.
class Outputs {
 public:
  explicit Outputs(const RunConfig& c) : dir_(c.output), config_(serialize(c)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw std::runtime_error("cannot create output directory " + dir_.string());
    }
  }
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : result.files) std::filesystem::remove(f, ec);
  }
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;

  void write(const std::string& name, Table t) {
    t.config = config_;
    const auto path = dir_ / name;
    write_csv(path, t);
    result.files.push_back(path);
  }
  RunResult commit() {
    committed_ = true;
    return std::move(result);
  }

  RunResult result;

 private:
  std::filesystem::path dir_;
  KeyValues config_;
  bool committed_ = false;
};

std::string step_suffix(std::size_t n) { return "_n" + std::to_string(n) + ".csv"; }

double max_state_diff(const PhaseState& a, const PhaseState& b) {
  return std::max(std::abs(a.eta - b.eta), std::abs(a.pi - b.pi));
}

RunResult run_trajectory(const RunConfig& c) {
  Outputs out(c);
  const Hamiltonian h(*c.hamiltonian, c.scales);
  const SplitStepper stepper(h, c.dlambda);
  const PhaseState s0{c.eta0, c.pi0, 0.0};
  const Trajectory traj = evolve(stepper, s0, c.steps);
  Table t = trajectory_table(traj);
  t.add_meta("source", "split");
  out.write("trajectory.csv", t);

  double drift = 0.0;
  for (const auto& s : traj) drift = std::max(drift, std::abs(s.energy - traj.front().energy));
  out.result.messages.push_back("max energy deviation: " + format_double(drift));

  const Model m = *c.hamiltonian;
  if (m == Model::Free || m == Model::LinearScalar) {
    Trajectory exact;
    for (const auto& s : traj) {
      const PhaseState e = m == Model::Free ? exact_free(s0, s.lambda) : exact_linear_scalar(s0, s.lambda);
      exact.push_back({s.lambda, e.eta, e.pi, hamiltonian_value(h, e)});
    }
    Table te = trajectory_table(exact);
    te.add_meta("source", "closed-form");
    out.write("trajectory_exact.csv", te);
  } else if (m == Model::QuadraticScalar) {
    std::vector<double> lambdas;
    for (const auto& s : traj) lambdas.push_back(s.lambda);
    if (lambdas.back() > 0.0) {
      Table to = trajectory_table(integrate_momentum_ode(c.pi0, -c.eta0, lambdas.back(), 1e-10, lambdas));
      to.add_meta("source", "ode");
      out.write("trajectory_ode.csv", to);
    }
  }
  return out.commit();
}

Table summary_table(const std::vector<DensityField>& fields,
                    const std::vector<std::vector<double>>* sample_pi) {
  Table t;
  t.kind = "density-summary";
  t.columns = {"step", "lambda", "mass", "eta_excess_kurtosis", "pi_skewness",
               "pi_excess_kurtosis", "boundary_warning"};
  if (sample_pi) {
    t.columns.insert(t.columns.end(), {"sample_pi_excess_kurtosis", "sample_pi_kurtosis_se"});
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    const Marginals m = marginals(f);
    const Moments me = distribution_moments(m.eta, m.spatial);
    const Moments mp = distribution_moments(m.pi, m.momentum);
    std::vector<double> row = {static_cast<double>(f.provenance.step), f.lambda, total_mass(f),
                               me.excess_kurtosis, mp.skewness, mp.excess_kurtosis,
                               f.boundary_warning ? 1.0 : 0.0};
    if (sample_pi) {
      const SampleMoments sm = sample_moments((*sample_pi)[i]);
      row.push_back(sm.excess_kurtosis);
      row.push_back(sm.kurtosis_se);
    }
    t.add_row(std::move(row));
  }
  return t;
}

RunResult run_density(const RunConfig& c) {
  Outputs out(c);
  const Hamiltonian h(*c.hamiltonian, c.scales);
  const InitialDensity rho0 = InitialDensity::gaussian(c.initial);
  const std::size_t n_steps = c.snapshots.back();
  const auto fields = evolve_density(rho0, h, c.grid, c.dlambda, n_steps, c.snapshots);

  for (const auto& f : fields) {
    const std::size_t n = f.provenance.step;
    out.write("snapshot" + step_suffix(n), snapshot_table(f));
    const Marginals m = marginals(f);
    Table se = marginal_table(m.eta, m.spatial, "eta");
    se.add_meta("step", std::to_string(n));
    out.write("marginal_eta" + step_suffix(n), se);
    Table sp = marginal_table(m.pi, m.momentum, "pi");
    sp.add_meta("step", std::to_string(n));
    out.write("marginal_pi" + step_suffix(n), sp);
    out.write("current" + step_suffix(n), current_table(density_current(f, h)));
    if (f.boundary_warning) {
      out.result.messages.push_back("warning: density reaches the grid boundary at step " +
                                    std::to_string(n));
    }
  }

  std::vector<std::vector<double>> sample_pi;
  if (c.samples > 0) {
    // Forward-evolved particles give a sampling error for the kurtosis.
    auto particles = sample_gaussian(c.initial, c.samples, c.seed);
    const SplitStepper stepper(h, c.dlambda, Direction::Forward);
    std::size_t done = 0;
    for (std::size_t target : c.snapshots) {
      for (; done < target; ++done) {
        for (auto& p : particles) p = stepper.step(p);
      }
      std::vector<double> pis;
      pis.reserve(particles.size());
      for (const auto& p : particles) pis.push_back(p.pi);
      sample_pi.push_back(std::move(pis));
    }
  }
  Table summary = summary_table(fields, c.samples > 0 ? &sample_pi : nullptr);
  if (c.samples > 0) {
    summary.add_meta("samples", std::to_string(c.samples));
    summary.add_meta("seed", std::to_string(c.seed));
  }
  for (const auto& row : summary.rows) {
    std::string msg = "step " + std::to_string(static_cast<std::size_t>(row[0])) +
                      ": mass " + format_double(row[2]) + ", Pi excess kurtosis " +
                      format_double(row[5]);
    if (c.samples > 0) msg += " (sampling error " + format_double(row[8]) + ")";
    out.result.messages.push_back(msg);
  }
  out.write("density_summary.csv", summary);
  return out.commit();
}

RunResult run_current(const RunConfig& c) {
  Outputs out(c);
  const Hamiltonian h(*c.hamiltonian, c.scales);
  const InitialDensity rho0 = InitialDensity::gaussian(c.initial);
  std::vector<std::size_t> schedule;
  for (auto n : c.snapshots) schedule.insert(schedule.end(), {n - 1, n, n + 1});
  const auto fields = evolve_density(rho0, h, c.grid, c.dlambda, c.snapshots.back() + 1, schedule);
  auto field_at = [&fields](std::size_t n) -> const DensityField& {
    for (const auto& f : fields) {
      if (f.provenance.step == n) return f;
    }
    throw std::logic_error("missing snapshot");
  };

  Table cont;
  cont.kind = "continuity";
  cont.columns = {"step", "lambda", "max_residual", "l2_residual"};
  for (auto n : c.snapshots) {
    const std::array<CurrentPair, 3> cur = {density_current(field_at(n - 1), h),
                                            density_current(field_at(n), h),
                                            density_current(field_at(n + 1), h)};
    const ContinuityResidual r = continuity_residual(cur, c.dlambda);
    Table t = current_table(cur[1]);
    t.add_meta("step", std::to_string(n));
    out.write("current" + step_suffix(n), t);
    cont.add_row({static_cast<double>(n), cur[1].lambda, r.max_norm, r.l2_norm});
    out.result.messages.push_back("step " + std::to_string(n) + ": continuity residual L2 " +
                                  format_double(r.l2_norm));
  }
  out.write("continuity.csv", cont);
  return out.commit();
}

RunResult run_period(const RunConfig& c) {
  Outputs out(c);
  const double omega = c.scales.omega;
  const auto n_steps = static_cast<std::size_t>(std::floor(c.lambda_max / c.dlambda + 1e-9));
  Scales sc;
  sc.omega = omega;
  const SplitStepper stepper(Hamiltonian(Model::QuadraticScalar, sc), c.dlambda);
  const Trajectory split = evolve(stepper, {0.0, c.pi0, 0.0}, n_steps);
  std::vector<double> lambdas;
  for (const auto& s : split) lambdas.push_back(s.lambda);
  const Trajectory ode = integrate_momentum_ode(c.pi0, 0.0, lambdas.back(), c.tol, lambdas);
  Trajectory harmonic;
  for (double l : lambdas) {
    const double eta = c.pi0 * std::sin(l);
    const double pi = c.pi0 * std::cos(l);
    harmonic.push_back({l, eta, pi, 1.0 + 0.5 * (eta * eta + pi * pi)});
  }

  double deviation = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    deviation = std::max({deviation, std::abs(split[i].eta - ode[i].eta),
                          std::abs(split[i].pi - ode[i].pi)});
  }
  const MeasuredPeriod t_ode = measure_period(ode);
  const MeasuredPeriod t_split = measure_period(split);
  const PeriodPair duffing = rel_period(c.pi0, omega);
  const double t_harmonic = 2.0 * std::numbers::pi / omega;

  Table table;
  table.kind = "period";
  table.columns = {"pi0", "t_ode", "t_ode_uncertainty", "t_split", "t_elliptic", "t_expanded",
                   "t_harmonic"};
  table.add_row({c.pi0, t_ode.period / omega, t_ode.uncertainty / omega, t_split.period / omega,
                 duffing.elliptic, duffing.expanded, t_harmonic});
  table.add_meta("max_split_ode_deviation", format_double(deviation));
  out.write("period_table.csv", table);

  const std::array<std::pair<const char*, const Trajectory*>, 3> curves = {
      {{"split", &split}, {"ode", &ode}, {"harmonic", &harmonic}}};
  for (auto [name, traj] : curves) {
    Table t = trajectory_table(*traj);
    t.add_meta("source", name);
    out.write(std::string("trajectory_") + name + ".csv", t);
  }

  // Relative period correction against the kinetic energy of the turning point.
  Table corr;
  corr.kind = "period-correction";
  corr.columns = {"pi0", "kinetic_energy", "electron_kev", "rel_ode", "rel_elliptic", "rel_expanded"};
  for (int k = 1; k <= 20; ++k) {
    const double p0 = 0.05 * k;
    const PeriodPair pp = rel_period(p0, 1.0);
    const double len = 3.0 * pp.elliptic;
    std::vector<double> grid;
    for (double l = 0.0; l <= len; l += 0.01) grid.push_back(l);
    const MeasuredPeriod mp = measure_period(integrate_momentum_ode(p0, 0.0, grid.back(), c.tol, grid));
    const double t0 = 2.0 * std::numbers::pi;
    const double kinetic = std::hypot(1.0, p0) - 1.0;
    corr.add_row({p0, kinetic, kElectronRestKeV * kinetic, mp.period / t0 - 1.0, pp.elliptic / t0 - 1.0,
                  pp.expanded / t0 - 1.0});
  }
  out.write("period_correction.csv", corr);

  out.result.messages.push_back("T_ode      " + format_double(t_ode.period / omega) + " +- " +
                                format_double(t_ode.uncertainty / omega));
  out.result.messages.push_back("T_split    " + format_double(t_split.period / omega));
  out.result.messages.push_back("T_elliptic " + format_double(duffing.elliptic));
  out.result.messages.push_back("T_expanded " + format_double(duffing.expanded));
  out.result.messages.push_back("2 pi/Omega " + format_double(t_harmonic));
  out.result.messages.push_back("max |split - ode| " + format_double(deviation));
  return out.commit();
}

RunResult run_salpeter(const RunConfig& c) {
  Outputs out(c);
  const SpectralState initial =
      gaussian_packet(c.spectral, c.packet_center, c.packet_width, c.packet_momentum);
  const bool linear = c.potential.kind == SalpeterPotential::Kind::Linear;
  std::vector<Observables> obs;
  SpectralState state = initial;
  std::optional<QuadraticSplitPropagator> prop;
  if (!linear) prop.emplace(c.spectral, c.potential.coefficient, c.dtau);

  auto wants_snapshot = [&](std::size_t k) {
    return k == 0 || k == c.steps || (c.snapshot_every > 0 && k % c.snapshot_every == 0);
  };
  auto wants_obs = [&](std::size_t k) {
    return k == 0 || k == c.steps || (c.observe_every > 0 && k % c.observe_every == 0);
  };
  std::size_t k = 0;
  while (true) {
    if (wants_obs(k)) obs.push_back(observables(state, c.potential));
    if (wants_snapshot(k)) out.write("salpeter" + step_suffix(k), salpeter_snapshot_table(state));
    if (k == c.steps) break;
    // Advance to the next step that produces output.
    std::size_t next = k + 1;
    while (next < c.steps && !wants_obs(next) && !wants_snapshot(next)) ++next;
    if (linear) {
      // Exact in time, so each output is propagated straight from the initial state.
      state = linear_exact_step(initial, c.potential.coefficient, static_cast<double>(next) * c.dtau);
    } else {
      prop->advance(state, next - k);
    }
    k = next;
  }
  Table t = observables_table(obs);
  t.add_meta("potential", linear ? "linear" : "quadratic");
  t.add_meta("coefficient", format_double(c.potential.coefficient));
  out.write("salpeter_observables.csv", t);
  const auto& last = obs.back();
  out.result.messages.push_back("final norm " + format_double(last.norm) + ", energy " +
                                format_double(last.energy) + ", <eta> " +
                                format_double(last.mean_eta));
  if (state.aliasing_warning) out.result.messages.push_back("warning: spectrum reached the band edge");
  if (state.edge_warning) out.result.messages.push_back("warning: wave packet reached the grid edge");
  return out.commit();
}

std::vector<Complex> salpeter_final(const RunConfig& c, double h) {
  SpectralState s = gaussian_packet(c.spectral, c.packet_center, c.packet_width, c.packet_momentum);
  QuadraticSplitPropagator prop(c.spectral, c.potential.coefficient, h);
  prop.advance(s, static_cast<std::size_t>(std::llround(c.lambda_end / h)));
  return s.psi;
}

RunResult run_convergence(const RunConfig& c) {
  Outputs out(c);
  std::vector<double> errors;
  std::string reference;
  if (c.target == ConvergenceTarget::Split) {
    const Hamiltonian h(*c.hamiltonian, c.scales);
    const PhaseState s0{c.eta0, c.pi0, 0.0};
    auto final_state = [&](double step) {
      const SplitStepper st(h, step);
      PhaseState s = s0;
      const auto n = std::llround(c.lambda_end / step);
      for (long long i = 0; i < n; ++i) s = st.step(s);
      return s;
    };
    const Model m = *c.hamiltonian;
    const bool exact = m == Model::Free || m == Model::LinearScalar;
    reference = exact ? "closed-form" : "richardson";
    for (double step : c.step_sizes) {
      const PhaseState s = final_state(step);
      const PhaseState ref = !exact ? final_state(step / 2.0)
                             : m == Model::Free ? exact_free(s0, c.lambda_end)
                                                : exact_linear_scalar(s0, c.lambda_end);
      errors.push_back(max_state_diff(s, ref));
    }
  } else {
    reference = "richardson";
    const double dxi = c.spectral.dxi();
    for (double step : c.step_sizes) {
      const auto a = salpeter_final(c, step);
      const auto b = salpeter_final(c, step / 2.0);
      double sum = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) sum += std::norm(a[j] - b[j]);
      errors.push_back(std::sqrt(sum * dxi));
    }
  }
  const double order = fitted_order(c.step_sizes, errors);
  Table t;
  t.kind = "convergence";
  t.columns = {"step", "error"};
  for (std::size_t i = 0; i < errors.size(); ++i) t.add_row({c.step_sizes[i], errors[i]});
  t.add_meta("reference", reference);
  t.add_meta("fitted_order", format_double(order));
  out.write("convergence.csv", t);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out.result.messages.push_back("step " + format_double(c.step_sizes[i]) + "  error " +
                                  format_double(errors[i]));
  }
  out.result.messages.push_back("fitted order " + format_double(order));
  return out.commit();
}

}  // namespace

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Trajectory: return "trajectory";
    case Command::Density: return "density";
    case Command::Current: return "current";
    case Command::Period: return "period";
    case Command::Salpeter: return "salpeter";
    case Command::Convergence: return "convergence";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (Command c : kCommands) {
    if (command_name(c) == name) return c;
  }
  throw UsageError("unknown command '" + std::string(name) + "'");
}

bool RunConfig::operator==(const RunConfig& o) const {
  return command == o.command && serialize(*this) == serialize(o);
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  const bool csv = text.find("# kind:") != std::string::npos;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(std::string_view(t).substr(1));
      if (body.rfind("config:", 0) != 0) continue;
      t = trim(std::string_view(body).substr(7));
    } else if (csv) {
      break;  // end of the CSV header
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

RunConfig make_config(Command command, const KeyValues& values) {
  RunConfig c;
  c.command = command;
  for (const auto& [key, value] : values) {
    if (key == "command") {
      if (value != command_name(command)) {
        throw UsageError("configuration is for command '" + value + "', not '" +
                         std::string(command_name(command)) + "'");
      }
      continue;
    }
    const KeySpec* k = find_key(key);
    if (!k || !(k->commands & bit(command))) {
      throw UsageError("unknown key '" + key + "' for command '" + std::string(command_name(command)) + "'");
    }
    k->set(c, value);
    c.explicit_keys.insert(key);
  }
  finalize(c);
  return c;
}

KeyValues serialize(const RunConfig& c) {
  KeyValues out;
  out.emplace_back("command", std::string(command_name(c.command)));
  for (const auto& k : key_table()) {
    if (applies(k, c)) out.emplace_back(k.name, k.get(c));
  }
  return out;
}

std::string usage() {
  return "usage: rho_sim <command> [--config FILE] [--key value ...]\n"
         "commands: trajectory, density, current, period, salpeter, convergence\n"
         "run 'rho_sim <command> --help' for the keys of a command\n";
}

RunConfig parse_arguments(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError("no command given");
  CLI::App app{"Relativistic oscillator phase-space and Salpeter simulations", "rho_sim"};
  app.require_subcommand(1);
  struct Sub {
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<Command, Sub> subs;
  for (Command cmd : kCommands) {
    Sub& s = subs[cmd];
    s.app = app.add_subcommand(std::string(command_name(cmd)));
    s.app->add_option("--config", s.config, "key = value file, or a CSV written by rho_sim");
    for (const auto& k : key_table()) {
      if (!(k.commands & bit(cmd))) continue;
      s.options[k.name] = s.app->add_option("--" + k.name, s.values[k.name], k.help);
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  for (auto& [cmd, s] : subs) {
    if (!s.app->parsed()) continue;
    KeyValues kv;
    if (!s.config.empty()) {
      std::ifstream in(s.config, std::ios::binary);
      if (!in) throw UsageError("cannot read config file " + s.config);
      std::ostringstream buf;
      buf << in.rdbuf();
      kv = parse_config_text(buf.str());
    }
    for (const auto& k : key_table()) {
      auto it = s.options.find(k.name);
      if (it != s.options.end() && it->second->count() > 0) kv.emplace_back(k.name, s.values[k.name]);
    }
    return make_config(cmd, kv);
  }
  throw UsageError("no command given");
}

RunResult run(const RunConfig& c) {
  switch (c.command) {
    case Command::Trajectory: return run_trajectory(c);
    case Command::Density: return run_density(c);
    case Command::Current: return run_current(c);
    case Command::Period: return run_period(c);
    case Command::Salpeter: return run_salpeter(c);
    case Command::Convergence: return run_convergence(c);
  }
  throw std::logic_error("unhandled command");
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_arguments(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const UsageError& e) {
    err << "rho_sim: " << e.what() << "\n" << usage();
    return 2;
  }
  try {
    const RunResult r = run(config);
    for (const auto& m : r.messages) out << m << '\n';
    for (const auto& f : r.files) out << "wrote " << f.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "rho_sim: " << e.what() << '\n';
    return 1;
  }
}

double fitted_order(const std::vector<double>& steps, const std::vector<double>& errors) {
  if (steps.size() != errors.size() || steps.size() < 2) {
    throw std::invalid_argument("fitted_order: need at least two (step, error) pairs");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0) || !(errors[i] > 0.0)) {
      throw DomainError("fitted_order: steps and errors must be positive");
    }
    const double x = std::log(steps[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw DomainError("fitted_order: step sizes must differ");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace rho::cli
