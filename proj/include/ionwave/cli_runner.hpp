#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ionwave::cli {

inline constexpr const char* kVersion = "0.1.0";

// Runs one CLI invocation (args excludes the program name). Returns the
// process exit code: 0 success, 2 config error, 3 numerical error,
// 4 physics-infeasible.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ionwave::cli
