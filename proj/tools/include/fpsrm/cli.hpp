#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpsrm::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  ///< numerical or I/O failure
inline constexpr int kExitUsage = 2;    ///< invalid flags or values

/// Runs one subcommand. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace fpsrm::cli
