#pragma once

#include <iosfwd>

namespace cornerforge::cli {

/// Exit codes are a stable contract for CI.
enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,    // bad flags, bad config, bad input files
  kRuntimeError = 2,  // backend or generation failures, output I/O
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cornerforge::cli
