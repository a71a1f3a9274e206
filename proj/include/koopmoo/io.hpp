#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopmoo/dictionary.hpp"

namespace koopmoo {

/// Round-trip formatting with 17 significant digits; non-finite values print as inf, -inf, nan.
std::string format_double(double v);

/// Comma-separated writer; parent directories are created. Throws std::runtime_error on I/O failure.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);
  void row(const Vector& values);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

/// Numeric CSV with one header line.
CsvTable read_csv(const std::filesystem::path& path);

/// Time column followed by one column per state component.
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& times, const Matrix& states,
                          const std::vector<std::string>& names);

/// JSON text with every floating-point number written to 17 significant digits.
/// Non-finite numbers become null.
std::string dump_json(const nlohmann::json& j, int indent = 2);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace koopmoo
