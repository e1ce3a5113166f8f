#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coannot::cli {

enum ExitCode { kSuccess = 0, kDomainError = 1, kUsageError = 2 };

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coannot::cli
