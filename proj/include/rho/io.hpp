#pragma once

// CSV tables with `#` metadata headers.
//
// Layout:
//   # kind: snapshot
//   # <key>: <value>            free-form metadata
//   # config: <key> = <value>   run configuration, replayable with --config
//   eta,pi,rho                  column header
//   ...                         rows, every value printed with %.12e

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rho/density.hpp"
#include "rho/salpeter.hpp"
#include "rho/split.hpp"

namespace rho {

struct Table {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_meta(std::string key, std::string value) {
    metadata.emplace_back(std::move(key), std::move(value));
  }
  void add_row(std::vector<double> row);
  /// Metadata value for `key`; throws std::out_of_range if absent.
  const std::string& meta(const std::string& key) const;
  /// Index of a column; throws std::out_of_range if absent.
  std::size_t column(const std::string& name) const;
};

/// %.12e
std::string format_double(double v);

std::string to_csv(const Table& t);
/// Writes through a temporary file that is renamed into place, so a failed
/// write never leaves a partial file at `path`. Throws std::runtime_error.
void write_csv(const std::filesystem::path& path, const Table& t);

/// Throws std::runtime_error naming the offending line for malformed input.
Table parse_csv(const std::string& text);
Table read_csv(const std::filesystem::path& path);

Table snapshot_table(const DensityField& f);
Table marginal_table(std::span<const double> coords, std::span<const double> values,
                     const std::string& axis);
Table current_table(const CurrentPair& c);
Table trajectory_table(const Trajectory& traj);
Table salpeter_snapshot_table(const SpectralState& s);
Table observables_table(std::span<const Observables> obs);

}  // namespace rho
