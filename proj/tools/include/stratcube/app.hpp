#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stratcube::app {

/// Runs the command line `args` (without the program name).
/// Returns 0 on success, 2 on invalid input, 1 on any other failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stratcube::app
