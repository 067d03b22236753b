#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace r2a {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitParse = 2,
    kExitPrecondition = 3,
    kExitBudget = 4,
};

// args excludes the program name, e.g. {"verify", "--relu", "f.json", ...}
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace r2a
