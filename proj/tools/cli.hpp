#pragma once

#include <iosfwd>

namespace stanav::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // the command ran but the outcome failed (no path, robot fell)
inline constexpr int kExitUsage = 2;    // bad flags, config or input files

/// Entry point of the `stanav` binary; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stanav::cli
