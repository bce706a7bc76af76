#pragma once

#include <iosfwd>

namespace hybrid_orbit {

// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,          // success, or a stable verdict
    kExitUnstable = 1,    // the stability verdict is unstable / a check failed
    kExitInputError = 2,  // bad flags, unreadable or malformed input
    kExitNumerical = 3,   // solver or integrator failure
};

// Subcommands: analyze, synthesize, certify, simulate, verify-paper.
// Results go to --output when given (written atomically) and to `out` otherwise.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hybrid_orbit
