#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cizsl {

/// Runs one `cizsl` command line. Returns the process exit code: 0 on
/// success, 1 on input or config errors, 2 on runtime or numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cizsl
