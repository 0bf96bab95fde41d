#pragma once

// RFC-4180 CSV tables with 17 significant digits, JSON files, and the
// per-instance density / particle tables.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/continuum.hpp"

namespace pileup {

/// %.17g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  /// Column index by header name; throws ConfigError if absent.
  std::size_t column(const std::string& name) const;
};

std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& t);
CsvTable read_csv(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// x_left, x_right, x_center, density, mass from the first to the last cell with mass.
CsvTable density_table(const GridDensity& rho);

/// index, x, x_raw, quantile; quantile cells are empty past the end of `quantiles`.
CsvTable particle_table(const Eigen::VectorXd& x, double alpha, const Eigen::VectorXd& quantiles);

}  // namespace pileup
