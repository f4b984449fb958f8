#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sgdetect {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitMissingFile = 4,
  kExitRuntime = 5,
};

/// Runs one subcommand; args excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgdetect
