#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stegnet::cli {

/// Runs one command line (args[0] is the subcommand). Results go to `out`,
/// progress and diagnostics to `err`. Returns the process exit status:
/// 0 on success, 1 on a runtime error, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stegnet::cli
