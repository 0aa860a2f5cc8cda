#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hamflow::cli {

enum ExitCode : int { ok = 0, check_failed = 1, config_error = 2, numerical_failure = 3 };

/// Runs `hamflow <command> <subcommand> [--flags]`; args exclude the program
/// name. Results go to files named by the flags; short summaries to out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hamflow::cli
