#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace homectl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kEndpointError = 3 };

// Runs one command line. `args` excludes the program name. The REPL reads
// from `in`; everything else only writes to `out` / `err`.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace homectl::cli
