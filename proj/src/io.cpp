#include "rho/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace rho {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string line_error(std::size_t line, const std::string& what) {
  return "csv line " + std::to_string(line) + ": " + what;
}

std::string grid_description(const Grid2D& g) {
  std::ostringstream s;
  s << "eta[" << format_double(g.eta_min) << "," << format_double(g.eta_max) << "]x" << g.n_eta
    << " pi[" << format_double(g.pi_min) << "," << format_double(g.pi_max) << "]x" << g.n_pi;
  return s.str();
}

}  // namespace

void Table::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("table row width mismatch");
  rows.push_back(std::move(row));
}

const std::string& Table::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  throw std::out_of_range("missing metadata key '" + key + "'");
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::out_of_range("missing column '" + name + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string to_csv(const Table& t) {
  std::string out;
  out += "# kind: " + t.kind + "\n";
  for (const auto& [k, v] : t.metadata) out += "# " + k + ": " + v + "\n";
  for (const auto& [k, v] : t.config) out += "# config: " + k + " = " + v + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    const std::string body = to_csv(t);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place: " + path.string());
  }
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (have_columns) throw std::runtime_error(line_error(lineno, "comment after data"));
      const std::string body = trim(std::string_view(line).substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(body.substr(0, colon));
      const std::string value = trim(body.substr(colon + 1));
      if (key == "kind") {
        t.kind = value;
      } else if (key == "config") {
        const auto eq = value.find('=');
        if (eq == std::string::npos) {
          throw std::runtime_error(line_error(lineno, "config entry without '='"));
        }
        t.config.emplace_back(trim(value.substr(0, eq)), trim(value.substr(eq + 1)));
      } else {
        t.metadata.emplace_back(key, value);
      }
      continue;
    }
    auto cells = split_commas(line);
    if (!have_columns) {
      t.columns = std::move(cells);
      have_columns = true;
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw std::runtime_error(line_error(lineno, "expected " + std::to_string(t.columns.size()) +
                                                      " fields, found " +
                                                      std::to_string(cells.size())));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[i]);
      if (ec != std::errc() || ptr != c.data() + c.size()) {
        throw std::runtime_error(line_error(lineno, "not a number: '" + c + "'"));
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_columns) throw std::runtime_error("csv: no column header");
  return t;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

Table snapshot_table(const DensityField& f) {
  Table t;
  t.kind = "snapshot";
  t.add_meta("hamiltonian", std::string(model_name(f.provenance.model)));
  t.add_meta("dlambda", format_double(f.provenance.dlambda));
  t.add_meta("step", std::to_string(f.provenance.step));
  t.add_meta("lambda", format_double(f.lambda));
  t.add_meta("grid", grid_description(f.grid));
  t.add_meta("initial", f.provenance.initial);
  t.add_meta("boundary_warning", f.boundary_warning ? "1" : "0");
  t.columns = {"eta", "pi", "rho"};
  t.rows.reserve(f.grid.size());
  for (std::size_t i = 0; i < f.grid.n_eta; ++i) {
    for (std::size_t j = 0; j < f.grid.n_pi; ++j) {
      t.rows.push_back({f.grid.eta(i), f.grid.pi(j), f.at(i, j)});
    }
  }
  return t;
}

Table marginal_table(std::span<const double> coords, std::span<const double> values,
                     const std::string& axis) {
  if (coords.size() != values.size()) throw std::invalid_argument("marginal size mismatch");
  Table t;
  t.kind = "marginal";
  t.add_meta("axis", axis);
  t.columns = {"coord", "value"};
  for (std::size_t i = 0; i < coords.size(); ++i) t.rows.push_back({coords[i], values[i]});
  return t;
}

Table current_table(const CurrentPair& c) {
  Table t;
  t.kind = "current";
  t.add_meta("lambda", format_double(c.lambda));
  t.columns = {"eta", "S", "I"};
  for (std::size_t i = 0; i < c.eta.size(); ++i) {
    t.rows.push_back({c.eta[i], c.temporal[i], c.spatial[i]});
  }
  return t;
}

Table trajectory_table(const Trajectory& traj) {
  Table t;
  t.kind = "trajectory";
  t.columns = {"lambda", "eta", "pi", "energy"};
  t.rows.reserve(traj.size());
  for (const auto& s : traj) t.rows.push_back({s.lambda, s.eta, s.pi, s.energy});
  return t;
}

Table salpeter_snapshot_table(const SpectralState& s) {
  Table t;
  t.kind = "salpeter-snapshot";
  t.add_meta("tau", format_double(s.tau));
  t.add_meta("n_points", std::to_string(s.grid.n));
  t.add_meta("xi_min", format_double(s.grid.xi_min));
  t.add_meta("xi_max", format_double(s.grid.xi_max));
  t.add_meta("aliasing_warning", s.aliasing_warning ? "1" : "0");
  t.add_meta("edge_warning", s.edge_warning ? "1" : "0");
  t.columns = {"xi", "re_psi", "im_psi", "abs2"};
  for (std::size_t j = 0; j < s.grid.n; ++j) {
    const Complex z = s.psi[j];
    t.rows.push_back({s.grid.xi(j), z.real(), z.imag(), std::norm(z)});
  }
  return t;
}

Table observables_table(std::span<const Observables> obs) {
  Table t;
  t.kind = "salpeter-observables";
  t.columns = {"tau", "norm", "mean_xi", "mean_eta", "width_xi", "energy"};
  for (const auto& o : obs) {
    t.rows.push_back({o.tau, o.norm, o.mean_xi, o.mean_eta, o.width_xi, o.energy});
  }
  return t;
}

}  // namespace rho
