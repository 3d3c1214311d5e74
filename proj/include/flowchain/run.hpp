#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowchain/config.hpp"
#include "flowchain/report.hpp"

namespace flowchain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 2;  // dominance, audit or moment check failed

std::string version();

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json results = nlohmann::json::object();
  Table table;
  std::vector<std::pair<std::string, std::string>> console;  // "name = value" lines
  std::vector<std::string> warnings;
};

/// Computes one subcommand without touching the disk or the console.
RunResult execute(const RunConfig& config);

/// Full report document: config, hash, seed, version, timestamp, runtime and results.
nlohmann::json build_report(const RunConfig& config, const RunResult& result, const std::string& timestamp);

/// execute, write out/report.{json,csv}, print the console lines. Returns the exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Command-line entry: flags and --config merged into one RunConfig, then run.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowchain::cli
