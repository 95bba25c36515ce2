#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace groundwork {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (args exclude the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace groundwork
