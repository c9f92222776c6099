#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace abf::cli {

// Exit codes: 0 success, 1 I/O or data error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

// Entry point for the `abf` tool. `args` excludes the program name.
// Subcommands: gen, run, compare, score, snapshot.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace abf::cli
