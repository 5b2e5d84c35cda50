#pragma once

#include <iosfwd>

namespace lrcssp {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

// lrcssp gen|run|report. Configuration and usage problems exit with 2,
// runtime failures with 1.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrcssp
