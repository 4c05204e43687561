#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace longmix::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes: 0 success, 2 invalid input or usage, 3 estimation failure.
enum ExitCode : int { kOk = 0, kInternal = 1, kValidation = 2, kConvergence = 3 };

/// Runs one subcommand. `args` includes the program name, as in argv.
/// Reports go to files under --out; all messages go to `err`.
int run(const std::vector<std::string>& args, std::ostream& err);

}  // namespace longmix::cli
