#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sae::cli {

enum ExitCode : int { ok = 0, failure = 1, usage = 2, not_converged = 3 };

/// Runs the `sae` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sae::cli
