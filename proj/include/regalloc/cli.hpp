#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace regalloc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Verbosity comes
/// from REGALLOC_RL_LOG (trace, debug, info, warn, error, off).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regalloc
