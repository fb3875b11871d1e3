#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "rho/cli.hpp"
#include "rho/io.hpp"

using namespace rho;
using namespace rho::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rho_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = main_entry(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string usage_message(const std::vector<std::string>& args) {
  try {
    parse_arguments(args);
  } catch (const UsageError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("command names") {
  for (auto c : {Command::Trajectory, Command::Density, Command::Current, Command::Period,
                 Command::Salpeter, Command::Convergence}) {
    CHECK(parse_command(command_name(c)) == c);
  }
  CHECK_THROWS_AS(parse_command("plot"), UsageError);
}

TEST_CASE("parses the reference trajectory invocation") {
  const RunConfig c = parse_arguments(
      {"trajectory", "--hamiltonian", "quadratic-scalar", "--pi0", "0.9", "--dlambda", "5e-3", "--steps", "2400"});
  CHECK(c.command == Command::Trajectory);
  REQUIRE(c.hamiltonian.has_value());
  CHECK(*c.hamiltonian == Model::QuadraticScalar);
  CHECK(c.pi0 == 0.9);
  CHECK(c.dlambda == 5e-3);
  CHECK(c.steps == 2400);
  CHECK(c.explicit_keys.count("pi0") == 1);
}

TEST_CASE("usage errors") {
  const Outcome empty = call({});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("usage: rho_sim") != std::string::npos);

  CHECK(usage_message({"trajectory", "--hamiltonian", "linear-scalar", "--omega", "2"}) ==
        "key 'omega' does not apply to hamiltonian 'linear-scalar'");
  CHECK(usage_message({"trajectory", "--hamiltonian", "quadratic-mass", "--accel", "2"}) ==
        "key 'accel' does not apply to hamiltonian 'quadratic-mass'");
  CHECK(usage_message({"trajectory", "--pi0", "0.3"}) == "missing required key 'hamiltonian'");
  CHECK(usage_message({"density", "--hamiltonian", "free", "--dlambda", "0"}).find("dlambda") != std::string::npos);
  CHECK(usage_message({"trajectory", "--hamiltonian", "harmonic"}).find("harmonic") != std::string::npos);
  CHECK(usage_message({"trajectory", "--hamiltonian", "free", "--steps", "-3"}).find("steps") != std::string::npos);
  CHECK(usage_message({"trajectory", "--hamiltonian", "free", "--pi0", "abc"}).find("pi0") != std::string::npos);
  CHECK_FALSE(usage_message({"trajectory", "--hamiltonian", "free", "--bogus", "1"}).empty());
  CHECK_FALSE(usage_message({"fly"}).empty());
  CHECK(call({"trajectory", "--hamiltonian", "linear-scalar", "--omega", "2"}).code == 2);

  CHECK_THROWS_WITH_AS(make_config(Command::Salpeter, {{"hamiltonian", "free"}}),
                       "unknown key 'hamiltonian' for command 'salpeter'", UsageError);
  CHECK_THROWS_WITH_AS(make_config(Command::Trajectory, {{"hamiltonian", "free"}, {"curvature", "1"}}),
                       "unknown key 'curvature' for command 'trajectory'", UsageError);
  CHECK_THROWS_AS(make_config(Command::Salpeter, {{"potential", "linear"}, {"curvature", "1"}}), UsageError);
  CHECK_THROWS_AS(make_config(Command::Salpeter, {{"n_points", "1000"}}), UsageError);
  CHECK_THROWS_AS(make_config(Command::Convergence, {{"target", "split"}, {"hamiltonian", "linear-scalar"},
                                                     {"step_sizes", "0.3"}}),
                  UsageError);
}

TEST_CASE("help exits 0") {
  const Outcome h = call({"trajectory", "--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("--hamiltonian") != std::string::npos);
  CHECK(h.out.find("--dlambda") != std::string::npos);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("config files, comments and flag precedence") {
  TempDir dir("cfg");
  const fs::path cfg = dir.path / "run.conf";
  std::ofstream(cfg) << "# a comment\nhamiltonian = quadratic-scalar\n\npi0 = 0.4\nsteps=10\n";
  const RunConfig c = parse_arguments({"trajectory", "--config", cfg.string(), "--pi0", "0.7"});
  CHECK(c.pi0 == 0.7);
  CHECK(c.steps == 10);
  CHECK(*c.hamiltonian == Model::QuadraticScalar);
  CHECK_THROWS_AS(parse_arguments({"trajectory", "--config", (dir.path / "none").string()}), UsageError);

  const KeyValues plain = parse_config_text("# config: a = 1\n# note\nb = 2 \n");
  REQUIRE(plain.size() == 2);
  CHECK(plain[0] == std::pair<std::string, std::string>{"a", "1"});
  CHECK(plain[1] == std::pair<std::string, std::string>{"b", "2"});
  // In a CSV only the header counts.
  const KeyValues csv = parse_config_text("# kind: snapshot\n# config: a = 1\n# step: 3\neta,pi,rho\n1,2,3\n");
  REQUIRE(csv.size() == 1);
  CHECK(csv[0].first == "a");
  CHECK_THROWS_AS(parse_config_text("just words\n"), UsageError);
}

TEST_CASE("serialization round-trips every command") {
  const std::vector<std::pair<Command, KeyValues>> cases = {
      {Command::Trajectory, {{"hamiltonian", "linear-mass"}, {"accel", "0.3"}, {"eta0", "0.1"}}},
      {Command::Density, {{"hamiltonian", "quadratic-scalar"}, {"snapshots", "0,10"}}},
      {Command::Current, {{"hamiltonian", "free"}, {"snapshots", "5"}}},
      {Command::Period, {{"pi0", "0.3"}}},
      {Command::Salpeter, {{"potential", "linear"}, {"slope", "0.2"}}},
      {Command::Convergence, {{"target", "salpeter"}}},
  };
  for (const auto& [cmd, kv] : cases) {
    const RunConfig c = make_config(cmd, kv);
    const RunConfig again = make_config(cmd, serialize(c));
    INFO(command_name(cmd));
    CHECK(again == c);
    CHECK(serialize(again) == serialize(c));
  }
}

TEST_CASE("trajectory run writes split and reference curves") {
  TempDir dir("traj");
  const Outcome o = call({"trajectory", "--hamiltonian", "linear-scalar", "--pi0", "0.2", "--steps", "200",
                          "--dlambda", "1e-2", "--output", dir.path.string()});
  REQUIRE(o.code == 0);
  const Table split = read_csv(dir.path / "trajectory.csv");
  const Table exact = read_csv(dir.path / "trajectory_exact.csv");
  CHECK(split.rows.size() == 201);
  REQUIRE(exact.rows.size() == split.rows.size());
  const std::size_t ip = split.column("pi");
  const std::size_t ie = split.column("eta");
  double worst = 0.0;
  for (std::size_t k = 0; k < split.rows.size(); ++k) {
    CHECK(split.rows[k][ip] == doctest::Approx(exact.rows[k][ip]).epsilon(1e-11));
    worst = std::max(worst, std::abs(split.rows[k][ie] - exact.rows[k][ie]));
  }
  CHECK(worst < 1e-4);
  CHECK(worst > 0.0);
}

TEST_CASE("density run emits snapshots, marginals, currents and a summary; replay is byte-identical") {
  TempDir dir("dens");
  const fs::path out1 = dir.path / "first";
  const Outcome o = call({"density", "--hamiltonian", "quadratic-scalar", "--snapshots", "0,20,40",
                          "--n_eta", "41", "--n_pi", "41", "--samples", "500", "--output", out1.string()});
  INFO(o.err);
  REQUIRE(o.code == 0);
  for (int n : {0, 20, 40}) {
    const std::string s = std::to_string(n);
    CHECK(fs::exists(out1 / ("snapshot_n" + s + ".csv")));
    CHECK(fs::exists(out1 / ("marginal_eta_n" + s + ".csv")));
    CHECK(fs::exists(out1 / ("marginal_pi_n" + s + ".csv")));
    CHECK(fs::exists(out1 / ("current_n" + s + ".csv")));
  }
  const Table summary = read_csv(out1 / "density_summary.csv");
  REQUIRE(summary.rows.size() == 3);
  for (const auto& r : summary.rows) CHECK(std::abs(r[summary.column("mass")] - 1.0) < 1e-3);
  CHECK(summary.column("sample_pi_excess_kurtosis") > 0);

  const Table snap = read_csv(out1 / "snapshot_n20.csv");
  CHECK(snap.kind == "snapshot");
  CHECK(snap.meta("step") == "20");
  CHECK(snap.rows.size() == 41 * 41);

  // Replay from the header of one output, into a new directory.
  const fs::path out2 = dir.path / "second";
  REQUIRE(call({"density", "--config", (out1 / "snapshot_n20.csv").string(), "--output", out2.string()}).code == 0);
  for (const auto& e : fs::directory_iterator(out1)) {
    const fs::path twin = out2 / e.path().filename();
    REQUIRE(fs::exists(twin));
    std::string a = slurp(e.path()), b = slurp(twin);
    // The output directory itself is the only setting that differs.
    auto strip = [](std::string s) {
      const auto p = s.find("# config: output = ");
      if (p != std::string::npos) s.erase(p, s.find('\n', p) - p);
      return s;
    };
    CHECK(strip(a) == strip(b));
  }
}

TEST_CASE("current run reports the continuity residual") {
  TempDir dir("cur");
  REQUIRE(call({"current", "--hamiltonian", "quadratic-scalar", "--snapshots", "50", "--n_eta", "81",
                "--n_pi", "81", "--output", dir.path.string()})
              .code == 0);
  const Table c = read_csv(dir.path / "continuity.csv");
  REQUIRE(c.rows.size() == 1);
  CHECK(c.rows[0][c.column("step")] == 50);
  CHECK(c.rows[0][c.column("l2_residual")] < 1e-2);
  CHECK(fs::exists(dir.path / "current_n50.csv"));
}

TEST_CASE("period run compares periods from all routes") {
  TempDir dir("per");
  REQUIRE(call({"period", "--pi0", "0.9", "--output", dir.path.string()}).code == 0);
  const Table t = read_csv(dir.path / "period_table.csv");
  REQUIRE(t.rows.size() == 1);
  const auto& r = t.rows[0];
  CHECK(r[t.column("t_harmonic")] == doctest::Approx(2 * std::numbers::pi));
  CHECK(r[t.column("t_ode")] > 2 * std::numbers::pi);
  CHECK(r[t.column("t_ode")] == doctest::Approx(r[t.column("t_split")]).epsilon(1e-5));
  CHECK(r[t.column("t_elliptic")] == doctest::Approx(7.56).epsilon(1e-3));
  CHECK(std::stod(t.meta("max_split_ode_deviation")) < 1e-4);
  for (const char* f : {"trajectory_split.csv", "trajectory_ode.csv", "trajectory_harmonic.csv"}) {
    CHECK(fs::exists(dir.path / f));
  }
  const Table corr = read_csv(dir.path / "period_correction.csv");
  CHECK(corr.rows.size() == 20);
  // Relative corrections grow with the amplitude.
  for (std::size_t k = 1; k < corr.rows.size(); ++k) {
    CHECK(corr.rows[k][corr.column("rel_ode")] > corr.rows[k - 1][corr.column("rel_ode")]);
  }
}

TEST_CASE("salpeter run") {
  TempDir dir("sal");
  REQUIRE(call({"salpeter", "--potential", "quadratic", "--curvature", "0.5", "--dtau", "1e-2", "--steps", "200",
                "--n_points", "512", "--snapshot_every", "100", "--output", dir.path.string()})
              .code == 0);
  const Table obs = read_csv(dir.path / "salpeter_observables.csv");
  for (const auto& r : obs.rows) CHECK(std::abs(r[obs.column("norm")] - 1.0) < 1e-10);
  for (int k : {0, 100, 200}) CHECK(fs::exists(dir.path / ("salpeter_n" + std::to_string(k) + ".csv")));
}

TEST_CASE("convergence runs recover second order") {
  TempDir dir("conv");
  REQUIRE(call({"convergence", "--target", "split", "--hamiltonian", "linear-scalar", "--output", (dir.path / "a").string()})
              .code == 0);
  const Table a = read_csv(dir.path / "a" / "convergence.csv");
  CHECK(a.meta("reference") == "closed-form");
  CHECK(std::stod(a.meta("fitted_order")) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(a.rows.size() == 3);

  REQUIRE(call({"convergence", "--target", "salpeter", "--n_points", "512", "--output", (dir.path / "b").string()})
              .code == 0);
  const Table b = read_csv(dir.path / "b" / "convergence.csv");
  CHECK(b.meta("reference") == "richardson");
  CHECK(std::stod(b.meta("fitted_order")) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("fitted order") {
  CHECK(fitted_order({1.0, 0.5, 0.25}, {3.0, 0.75, 0.1875}) == doctest::Approx(2.0));
  CHECK_THROWS(fitted_order({1.0}, {1.0}));
  CHECK_THROWS(fitted_order({1.0, 1.0}, {1.0, 2.0}));
  CHECK_THROWS(fitted_order({1.0, 0.5}, {0.0, 1.0}));
}

TEST_CASE("runtime failures exit 1 and remove partial output") {
  TempDir dir("fail");
  fs::create_directories(dir.path / "trajectory_exact.csv");  // a directory blocks the second file
  const Outcome o = call({"trajectory", "--hamiltonian", "free", "--steps", "5", "--output", dir.path.string()});
  CHECK(o.code == 1);
  CHECK(o.err.rfind("rho_sim: ", 0) == 0);
  CHECK_FALSE(fs::exists(dir.path / "trajectory.csv"));
  CHECK_FALSE(fs::exists(dir.path / "trajectory.csv.part"));
}

TEST_CASE("the installed binary follows the exit-code contract") {
  const std::string bin = RHO_SIM_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  TempDir dir("bin");
  CHECK(status("") == 2);
  CHECK(status("period --help") == 0);
  CHECK(status("trajectory --hamiltonian linear-scalar --omega 2") == 2);
  CHECK(status("trajectory --hamiltonian free --steps 3 --output " + dir.path.string()) == 0);
  CHECK(fs::exists(dir.path / "trajectory.csv"));
}
