#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace colldiff::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kSolverFailure = 3,
};

// Runs one `colldiff` invocation. args[0] is the program name. Results go to
// files or `out`; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace colldiff::cli
