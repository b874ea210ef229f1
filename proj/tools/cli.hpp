#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phasegen::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 success, 1 configuration or usage error, 2 data error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phasegen::cli
