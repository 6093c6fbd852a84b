#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sbs::cli {

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out` unless --output names a file; diagnostics go to `err`.
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbs::cli
