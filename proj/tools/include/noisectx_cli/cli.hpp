#pragma once

#include <string>
#include <vector>

namespace noisectx::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNumerical = 2,
  kIo = 3,
};

/// Environment variable selecting the log level (trace, debug, info, warn,
/// error, off). Defaults to info.
inline constexpr const char* kLogEnv = "NOISECTX_LOG";

/// Runs one command line (args[0] is the program name) and returns its exit code.
int run(const std::vector<std::string>& args);

}  // namespace noisectx::cli
