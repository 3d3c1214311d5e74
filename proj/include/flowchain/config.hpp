#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flowchain::cli {

/// Schema violations, unknown keys and bad values. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueType { number, integer, u64, string, number_list };

std::string_view value_type_name(ValueType t);

/// One config key. Every command-line flag `--<key>` maps to exactly this key.
struct KeySpec {
  std::string key;
  ValueType type = ValueType::number;
  std::string help;
  /// Commands the key applies to, with the default filled in for that command. A null
  /// default means the key is optional and has no value unless given.
  std::vector<std::pair<std::string, nlohmann::json>> defaults;
  std::vector<std::string> choices;  // allowed values for string keys; empty means any
  bool required = false;
};

const std::vector<std::string>& commands();
const std::vector<KeySpec>& schema();
const KeySpec* find_key(std::string_view key);
bool key_applies(const KeySpec& spec, std::string_view cmd);

/// Closest known key within edit distance 2, or empty.
std::string suggest_key(std::string_view key);
std::size_t edit_distance(std::string_view a, std::string_view b);

struct RunConfig {
  std::string cmd;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = ".";
  /// Every key of the command, defaults filled; excludes workers and out.
  nlohmann::json params = nlohmann::json::object();

  bool has(std::string_view key) const;
  double number(std::string_view key) const;
  long long integer(std::string_view key) const;
  std::string string(std::string_view key) const;
  std::vector<double> list(std::string_view key) const;

  /// FNV-1a over the canonical dump of params (workers and out never enter the hash).
  std::string hash() const;
};

/// Validates a JSON object against the schema and fills defaults.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);

/// Converts command-line text for key into its JSON value.
nlohmann::json value_from_text(const KeySpec& spec, const std::string& text);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace flowchain::cli
