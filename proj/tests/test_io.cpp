#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "rho/density.hpp"
#include "rho/io.hpp"
#include "rho/salpeter.hpp"
#include "rho/split.hpp"

using namespace rho;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("rho_io_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_double(1.0) == "1.000000000000e+00");
  CHECK(format_double(-2.5e-7) == "-2.500000000000e-07");
  CHECK(format_double(0.0) == "0.000000000000e+00");
  // 13 significant digits: relative rounding at most 5e-13.
  const double x = 0.1234567890123456;
  CHECK(std::abs(std::stod(format_double(x)) - x) <= 5e-13 * x);
}

TEST_CASE("table text round trip") {
  Table t;
  t.kind = "test";
  t.add_meta("alpha", "1");
  t.config = {{"hamiltonian", "free"}, {"dlambda", "0.005"}};
  t.columns = {"a", "b"};
  t.add_row({1.0, -2.0});
  t.add_row({3.5e-12, 4.0});
  CHECK_THROWS_AS(t.add_row({1.0}), std::invalid_argument);

  const std::string text = to_csv(t);
  CHECK(text.rfind("# kind: test\n# alpha: 1\n# config: hamiltonian = free\n", 0) == 0);
  const Table back = parse_csv(text);
  CHECK(back.kind == "test");
  CHECK(back.meta("alpha") == "1");
  CHECK(back.config == t.config);
  CHECK(back.columns == t.columns);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1][0] == doctest::Approx(3.5e-12));
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), std::out_of_range);
  CHECK_THROWS_AS(back.meta("beta"), std::out_of_range);
}

TEST_CASE("parse errors name the offending line") {
  auto message = [](const std::string& text) {
    try {
      parse_csv(text);
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("a,b\n1,2\n3\n") == "csv line 3: expected 2 fields, found 1");
  CHECK(message("# kind: x\na,b\n1,zz\n") == "csv line 3: not a number: 'zz'");
  CHECK(message("a\n1\n# late\n") == "csv line 3: comment after data");
  CHECK(message("# config: nothing\na\n") == "csv line 1: config entry without '='");
  CHECK(message("# only comments\n") == "csv: no column header");
  CHECK(parse_csv("a,b\r\n1,2\r\n\n").rows.size() == 1);
}

TEST_CASE("files are written atomically") {
  TempDir dir;
  Table t;
  t.kind = "x";
  t.columns = {"v"};
  t.add_row({1.0});
  const fs::path p = dir.path / "out.csv";
  write_csv(p, t);
  CHECK(fs::exists(p));
  CHECK_FALSE(fs::exists(dir.path / "out.csv.part"));
  CHECK(read_csv(p).rows[0][0] == 1.0);

  // A directory in the way: the write fails and leaves nothing behind.
  const fs::path blocked = dir.path / "blocked.csv";
  fs::create_directories(blocked / "inner");
  CHECK_THROWS_AS(write_csv(blocked, t), std::runtime_error);
  CHECK_FALSE(fs::exists(dir.path / "blocked.csv.part"));

  CHECK_THROWS_AS(write_csv(dir.path / "missing" / "x.csv", t), std::runtime_error);
  CHECK_THROWS_AS(read_csv(dir.path / "nope.csv"), std::runtime_error);
}

TEST_CASE("snapshot, marginal and current tables") {
  const Grid2D grid{-2.0, 2.0, 5, -1.0, 1.0, 3};
  const auto g = InitialDensity::gaussian();
  const auto f = evolve_density(g, Hamiltonian(Model::QuadraticScalar), grid, 5e-3, 4, {4})[0];
  const Table s = snapshot_table(f);
  CHECK(s.kind == "snapshot");
  CHECK(s.columns == std::vector<std::string>{"eta", "pi", "rho"});
  CHECK(s.rows.size() == 15);
  CHECK(s.meta("hamiltonian") == "quadratic-scalar");
  CHECK(s.meta("step") == "4");
  CHECK(s.meta("boundary_warning") == "1");
  CHECK(s.rows[4][0] == -1.0);  // eta is the slow index
  CHECK(s.rows[4][1] == 0.0);
  const Table back = parse_csv(to_csv(s));
  CHECK(back.rows.size() == 15);
  CHECK(back.rows[7][2] == doctest::Approx(f.at(2, 1)).epsilon(1e-12));

  const Marginals m = marginals(f);
  const Table mt = marginal_table(m.eta, m.spatial, "eta");
  CHECK(mt.columns == std::vector<std::string>{"coord", "value"});
  CHECK(mt.meta("axis") == "eta");
  CHECK_THROWS_AS(marginal_table(m.eta, m.momentum, "eta"), std::invalid_argument);

  const Table ct = current_table(density_current(f, Hamiltonian(Model::QuadraticScalar)));
  CHECK(ct.columns == std::vector<std::string>{"eta", "S", "I"});
  CHECK(ct.rows.size() == 5);
}

TEST_CASE("trajectory and Salpeter tables") {
  const Trajectory traj = evolve(SplitStepper(Hamiltonian(Model::Free), 0.5), {0.0, 1.0}, 2);
  const Table t = trajectory_table(traj);
  CHECK(t.columns == std::vector<std::string>{"lambda", "eta", "pi", "energy"});
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[2][0] == 1.0);

  const auto s = gaussian_packet(SpectralGrid{64, -8.0, 8.0}, 0.0, 1.0);
  const Table st = salpeter_snapshot_table(s);
  CHECK(st.columns == std::vector<std::string>{"xi", "re_psi", "im_psi", "abs2"});
  CHECK(st.rows.size() == 64);
  CHECK(st.meta("n_points") == "64");
  for (const auto& r : st.rows) CHECK(r[3] == doctest::Approx(r[1] * r[1] + r[2] * r[2]));

  const std::vector<Observables> obs = {observables(s, SalpeterPotential::quadratic(0.5))};
  const Table ot = observables_table(obs);
  CHECK(ot.columns == std::vector<std::string>{"tau", "norm", "mean_xi", "mean_eta", "width_xi", "energy"});
  CHECK(ot.rows[0][1] == doctest::Approx(1.0));
}
