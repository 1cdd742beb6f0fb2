#pragma once

#include <string>
#include <vector>

namespace curate::cli {

/// Exit codes: 0 success, 1 data error (parse/join/range/I/O), 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line. argv[0] is the program name.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace curate::cli
