#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kwmhn::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kConfig = 3 };

/// Entry point of the kwmhn tool. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kwmhn::cli
