#include "flowchain/report.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace flowchain::cli {

void Table::add(std::vector<Cell> row) {
  if (row.size() != header.size()) {
    throw std::logic_error("table row has " + std::to_string(row.size()) + " cells, header has " +
                           std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_console(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  std::string s = buf;
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string cell_text(const Cell& c) {
  switch (c.index()) {
    case 0:
      return format_real(std::get<double>(c));
    case 1:
      return std::to_string(std::get<std::int64_t>(c));
    case 2:
      return std::to_string(std::get<std::uint64_t>(c));
    case 3:
      return quote_csv(std::get<std::string>(c));
    default:
      return std::get<bool>(c) ? "true" : "false";
  }
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t j = 0; j < table.header.size(); ++j) out += (j ? "," : "") + quote_csv(table.header[j]);
  out += '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j].index() == 0 && !std::isfinite(std::get<double>(row[j]))) {
        throw NonfiniteError("nonfinite value " + format_real(std::get<double>(row[j])) + " in CSV row " +
                             std::to_string(i) + ", column '" + table.header[j] + "'");
      }
      out += (j ? "," : "") + cell_text(row[j]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json cell_json(const Cell& c) {
  switch (c.index()) {
    case 0:
      return std::get<double>(c);
    case 1:
      return std::get<std::int64_t>(c);
    case 2:
      return std::get<std::uint64_t>(c);
    case 3:
      return std::get<std::string>(c);
    default:
      return std::get<bool>(c);
  }
}

nlohmann::json table_json(const Table& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t j = 0; j < row.size(); ++j) obj[table.header[j]] = cell_json(row[j]);
    rows.push_back(std::move(obj));
  }
  return rows;
}

void check_finite(const nlohmann::json& value, const std::string& path) {
  if (value.is_number_float()) {
    if (!std::isfinite(value.get<double>())) {
      throw NonfiniteError("nonfinite value " + format_real(value.get<double>()) + " at report field '" +
                           (path.empty() ? "/" : path) + "'");
    }
  } else if (value.is_object()) {
    for (auto it = value.begin(); it != value.end(); ++it) check_finite(*it, path + "/" + it.key());
  } else if (value.is_array()) {
    for (std::size_t i = 0; i < value.size(); ++i) check_finite(value[i], path + "/" + std::to_string(i));
  }
}

std::string dump_report(const nlohmann::json& report) {
  check_finite(report);
  return report.dump(2) + "\n";
}

void write_report(const std::string& out_dir, const nlohmann::json& report, const Table& table) {
  // Both documents are rendered before anything touches the disk, so a nonfinite value leaves
  // no partial output behind.
  const std::string json_text = dump_report(report);
  const std::string csv_text = to_csv(table);
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir + "': " + ec.message());
  const auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    f << text;
    f.close();
    if (!f) throw std::runtime_error("write to '" + p.string() + "' failed");
  };
  write(dir / "report.json", json_text);
  write(dir / "report.csv", csv_text);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace flowchain::cli
