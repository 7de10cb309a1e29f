#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fcco::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidConfig = 2,
  kDataError = 3,
  kDiverged = 4,
  kDiagnosticFailed = 5,
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t jobs = 1;
  std::optional<std::size_t> trace_every;
  bool quiet = false;
};

int cmd_run(const Options& options);
int cmd_diagnose(const Options& options);
int cmd_compare(const Options& options);

// Parses argv ("run|diagnose|compare <config> [flags]") and dispatches.
int main_entry(int argc, char** argv);

// Version string baked in at configure time.
std::string build_describe();

}  // namespace fcco::cli
