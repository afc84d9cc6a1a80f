#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace objguide::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitDimension = 3;
inline constexpr int kExitFailure = 4;  // any other runtime error

// Runs the tool on args (without the program name). Subcommands: match,
// vps, rectify, synth, eval; `objguide <cmd> --help` lists the flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace objguide::cli
