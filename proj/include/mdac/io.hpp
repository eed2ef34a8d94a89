#pragma once

// Small text I/O helpers shared by the file formats.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mdac {

/// Shortest-exact decimal form with 17 significant digits.
std::string fmt17(double x);

/// Number of steps T / dt; throws std::invalid_argument unless integral.
int steps_for(double horizon, double dt);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // throws ConfigError if absent
};

CsvTable read_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: parent directories are created.
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::vector<double> to_std(const Eigen::VectorXd& v);
Eigen::VectorXd to_eigen(const std::vector<double>& v);

}  // namespace mdac
