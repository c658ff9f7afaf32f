#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"
#include "calibloss/experiments.hpp"

namespace calibloss {

enum class OutputFormat { json, table, csv };

inline OutputFormat parse_format(const std::string& name) {
  if (name == "json") return OutputFormat::json;
  if (name == "table") return OutputFormat::table;
  if (name == "csv") return OutputFormat::csv;
  throw Error("unknown format: " + name + " (valid: json, table, csv)");
}

inline void require_spec_version(const Json& report) {
  if (!report.is_object() || !report.contains("spec_version")) {
    throw Error("report has no spec_version");
  }
  if (report["spec_version"] != kSpecVersion) {
    throw Error("report spec_version " + report["spec_version"].dump() + " does not match " +
                kSpecVersion);
  }
}

namespace detail {

inline std::string table_cell(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    std::ostringstream os;
    if (d != 0.0 && std::abs(d) < 1e-4) {
      os << std::scientific << std::setprecision(3) << d;
    } else {
      os << std::fixed << std::setprecision(6) << d;
    }
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (const char c : s) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + "\"";
  }
  return v.dump();
}

/// The tabular rows of a report and the scalar columns they share, in order
/// of first appearance. Nested values are left out of tables.
inline std::pair<const Json*, std::vector<std::string>> tabular(const Json& report) {
  const Json* rows = nullptr;
  if (report.contains("rows")) rows = &report["rows"];
  if (report.contains("measures")) rows = &report["measures"];
  std::vector<std::string> cols;
  if (rows == nullptr) return {nullptr, cols};
  for (const auto& row : *rows) {
    for (const auto& [key, value] : row.items()) {
      if (value.is_structured()) continue;
      if (std::find(cols.begin(), cols.end(), key) == cols.end()) cols.push_back(key);
    }
  }
  return {rows, cols};
}

}  // namespace detail

/// Aligned text rendering. Depends only on the JSON, so re-reading a saved
/// report reproduces it byte for byte.
inline std::string render_table(const Json& report) {
  require_spec_version(report);
  std::ostringstream out;
  const std::string title =
      report.contains("experiment") ? report["experiment"].get<std::string>() : "measures";
  out << "# " << title << "\n";

  const auto [rows, cols] = detail::tabular(report);
  if (rows != nullptr && !cols.empty()) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> width(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) width[c] = cols[c].size();
    for (const auto& row : *rows) {
      std::vector<std::string> line;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        line.push_back(row.contains(cols[c]) ? detail::table_cell(row[cols[c]]) : "");
        width[c] = std::max(width[c], line.back().size());
      }
      cells.push_back(std::move(line));
    }
    auto emit = [&](const std::vector<std::string>& line) {
      for (std::size_t c = 0; c < line.size(); ++c) {
        out << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << line[c];
      }
      out << "\n";
    };
    emit(cols);
    for (const auto& line : cells) emit(line);
  }

  if (report.contains("summary") && !report["summary"].empty()) {
    out << "summary: " << report["summary"].dump() << "\n";
  }
  if (report.contains("checks")) {
    for (const auto& c : report["checks"]) {
      const bool passed = c["passed"].get<bool>();
      const bool hard = c["hard"].get<bool>();
      out << (passed ? "PASS" : (hard ? "FAIL" : "WARN")) << "  " << c["name"].get<std::string>()
          << "  (" << c["detail"].get<std::string>() << ")\n";
    }
  }
  return out.str();
}

inline std::string render_csv(const Json& report) {
  require_spec_version(report);
  std::ostringstream out;
  const auto [rows, cols] = detail::tabular(report);
  if (rows == nullptr) return {};
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  for (const auto& row : *rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out << (c ? "," : "") << (row.contains(cols[c]) ? detail::csv_cell(row[cols[c]]) : "");
    }
    out << "\n";
  }
  return out.str();
}

inline std::string render(const Json& report, OutputFormat format) {
  switch (format) {
    case OutputFormat::json:
      require_spec_version(report);
      return report.dump(2) + "\n";
    case OutputFormat::table:
      return render_table(report);
    case OutputFormat::csv:
      return render_csv(report);
  }
  return {};
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
inline void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

/// UTC stamp like 20240131T235959Z, used only in file names.
inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm parts{};
  gmtime_r(&now, &parts);
  std::ostringstream os;
  os << std::put_time(&parts, "%Y%m%dT%H%M%SZ");
  return os.str();
}

struct WrittenReport {
  std::filesystem::path json;
  std::filesystem::path table;
};

/// {experiment}_{timestamp}_{seed}.json plus the matching .txt table.
inline WrittenReport write_report(const Json& report, const std::filesystem::path& dir,
                                  const std::string& stamp) {
  std::filesystem::create_directories(dir);
  const std::string seed =
      report["metadata"].contains("seed") ? report["metadata"]["seed"].dump() : "noseed";
  const std::string base = report["experiment"].get<std::string>() + "_" + stamp + "_" + seed;
  WrittenReport out{dir / (base + ".json"), dir / (base + ".txt")};
  write_atomically(out.json, report.dump(2) + "\n");
  write_atomically(out.table, render_table(report));
  return out;
}

inline Json read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  Json report;
  try {
    report = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error("malformed report " + path + ": " + e.what());
  }
  require_spec_version(report);
  return report;
}

}  // namespace calibloss
