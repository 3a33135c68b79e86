#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tracespec::cli {

/// Runs one invocation; args exclude the program name.  Exit codes: 0 success,
/// 1 failed check or internal error, 2 usage error, 3 invalid parameter,
/// 4 filesystem error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tracespec::cli
