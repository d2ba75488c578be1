#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gbmflow {

inline constexpr const char* kToolVersion = "1.0.0";

/// Exit codes: 0 success, 1 numerical or I/O failure, 2 invalid parameters or flags.
enum ExitCode : int { kExitOk = 0, kExitNumerical = 1, kExitInvalid = 2 };

/// Runs the gbmflow command line; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gbmflow
