#include "koopmoo/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "koopmoo/errors.hpp"

namespace koopmoo {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

void dump(const nlohmann::json& j, std::ostringstream& os, int indent, int level) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (level + 1)), ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * level), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  const char* sep = indent > 0 ? ": " : ":";
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << json_string(it.key()) << sep;
        dump(it.value(), os, indent, level + 1);
      }
      os << nl << close_pad << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[' << nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad;
        dump(v, os, indent, level + 1);
      }
      os << nl << close_pad << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
        return;
      }
      std::string s = format_double(v);
      // Keep floats recognisable as floats when read back.
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      os << s;
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(open_for_write(path)), columns_(header.size()) {
  for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw ConfigurationError("CSV row has the wrong number of columns");
  for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_double(values[k]);
  out_ << '\n';
  if (!out_) throw std::runtime_error("CSV write failed");
}

void CsvWriter::row(const Vector& values) { row(std::vector<double>(values.begin(), values.end())); }

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& times, const Matrix& states,
                          const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(times.size()) != states.rows()) {
    throw ConfigurationError("trajectory times and states disagree in length");
  }
  if (static_cast<Eigen::Index>(names.size()) != states.cols()) {
    throw ConfigurationError("one column name per state component is required");
  }
  std::vector<std::string> header{"t"};
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter csv(path, header);
  std::vector<double> row(header.size());
  for (std::size_t r = 0; r < times.size(); ++r) {
    row[0] = times[r];
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
      row[static_cast<std::size_t>(c) + 1] = states(static_cast<Eigen::Index>(r), c);
    }
    csv.row(row);
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw ConfigurationError("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigurationError(path.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigurationError("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    if (row.size() != table.header.size()) throw ConfigurationError("ragged row in " + path.string());
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string dump_json(const nlohmann::json& j, int indent) {
  std::ostringstream os;
  dump(j, os, indent, 0);
  return os.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_for_write(path);
  out << dump_json(j) << '\n';
  if (!out) throw std::runtime_error("JSON write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace koopmoo
