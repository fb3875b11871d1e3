#pragma once

// Front end of the rho_sim tool. Every setting is a `key = value` pair; the
// same keys are accepted as `--key value` flags, in a plain config file, or as
// the `# config:` header lines of any CSV the tool wrote. Flags override the file.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rho/density.hpp"
#include "rho/dynamics.hpp"
#include "rho/salpeter.hpp"

namespace rho::cli {

enum class Command { Trajectory, Density, Current, Period, Salpeter, Convergence };

std::string_view command_name(Command c);
/// Throws UsageError for unknown names.
Command parse_command(std::string_view name);

/// Invalid, missing or inconsistent settings; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ConvergenceTarget { Split, Salpeter };

struct RunConfig {
  Command command = Command::Trajectory;

  std::optional<Model> hamiltonian;
  Scales scales;
  double eta0 = 0.0;
  double pi0 = 0.9;
  double dlambda = 5e-3;
  std::size_t steps = 2400;

  std::vector<std::size_t> snapshots = {0, 1000, 1400, 2400};
  Grid2D grid{-3.0, 3.0, 201, -3.0, 3.0, 201};
  GaussianParams initial;
  std::size_t samples = 10000;
  unsigned long long seed = 42;

  double lambda_max = 40.0;
  double tol = 1e-10;

  SalpeterPotential potential = SalpeterPotential::quadratic(0.5);
  double dtau = 1e-3;
  SpectralGrid spectral;
  double packet_center = 2.0;
  double packet_width = 1.0;
  double packet_momentum = 0.0;
  std::size_t observe_every = 10;
  std::size_t snapshot_every = 0;

  ConvergenceTarget target = ConvergenceTarget::Split;
  std::vector<double> step_sizes = {1e-2, 5e-3, 2.5e-3};
  double lambda_end = 2.0;

  std::filesystem::path output = ".";

  /// Keys given by the user (file or flag), before defaults were filled in.
  std::set<std::string> explicit_keys;

  bool operator==(const RunConfig&) const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; `# config: key = value` lines are read as settings and
/// other `#` lines are ignored. In a CSV only the header is scanned.
KeyValues parse_config_text(const std::string& text);

/// Applies key/values on top of the defaults, fills derived defaults and
/// validates. Throws UsageError naming any unknown or inapplicable key.
RunConfig make_config(Command command, const KeyValues& values);

/// Every setting that applies to the command, in a fixed order; feeding the
/// result back to make_config reproduces the configuration.
KeyValues serialize(const RunConfig& config);

/// Parses the arguments that follow the program name.
RunConfig parse_arguments(const std::vector<std::string>& args);
std::string usage();

struct RunResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> messages;
};

/// Executes the configuration. Files already written are removed if a later
/// step fails.
RunResult run(const RunConfig& config);

/// Whole program: exit code 0 on success, 1 on runtime failure, 2 on usage errors.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Least-squares slope of log(error) against log(step).
double fitted_order(const std::vector<double>& steps, const std::vector<double>& errors);

}  // namespace rho::cli
