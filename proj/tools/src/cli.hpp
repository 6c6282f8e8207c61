#pragma once

#include <iosfwd>

namespace semi2i::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumerical = 3,
};

/// Parses and runs one subcommand. Human-readable output goes to `out`,
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace semi2i::cli
