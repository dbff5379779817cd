#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nsum {

/// Exit statuses of the command-line tool.
enum ExitStatus : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitValidation = 2,
  kExitSampler = 3,
};

/// Runs the `nsum` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace nsum
