#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latprobe::cli {

/// Runs the command line `args` (without the program name). Returns 0 on
/// success, 2 on input, schema or domain errors and 1 on internal errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latprobe::cli
