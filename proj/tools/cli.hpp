#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace calib::cli {

/// Exit codes of the `calib` tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kInternal = 3,
};

inline constexpr const char* kVersion = "0.1.0";

/// Runs the tool on argv-style arguments (args[0] is the program name).
/// Data goes to `out` or --out files, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace calib::cli
