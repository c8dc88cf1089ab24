// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace pathsage {

// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Runs one `pathsage <subcommand> ...` invocation. Results go to `out`,
// diagnostics and logs to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pathsage
