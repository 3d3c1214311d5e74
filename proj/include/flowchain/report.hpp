#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace flowchain::cli {

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string, bool>;

/// Flat result table. The header is fixed per subcommand and documented in the README.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

/// Raised when a result holds NaN or an infinity; names the offending field.
class NonfiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, which round-trips every double.
std::string format_real(double v);

/// Console form: %.12g, with ".0" appended to integral values (2 prints as 2.0).
std::string format_console(double v);

/// RFC 4180 CSV with a header row; '.' decimal separator, 17 significant digits.
std::string to_csv(const Table& table);

nlohmann::json cell_json(const Cell& c);

/// Rows as an array of objects keyed by the header.
nlohmann::json table_json(const Table& table);

/// Throws NonfiniteError naming the JSON path of the first nonfinite number.
void check_finite(const nlohmann::json& value, const std::string& path = "");

/// Pretty-printed with sorted keys.
std::string dump_report(const nlohmann::json& report);

/// Writes out_dir/report.json and out_dir/report.csv, creating out_dir if needed.
void write_report(const std::string& out_dir, const nlohmann::json& report, const Table& table);

/// UTC time in ISO 8601.
std::string utc_timestamp();

}  // namespace flowchain::cli
