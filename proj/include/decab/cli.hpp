#pragma once

#include <ostream>

namespace decab {

/// Exit codes of the command-line driver.
enum ExitCode : int {
    kExitOk = 0,
    kExitFalsified = 1,  // inadmissible parameters, falsified transition or plan
    kExitInput = 2,      // malformed config or arguments
    kExitResource = 3,   // enumeration cap exceeded
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace decab
