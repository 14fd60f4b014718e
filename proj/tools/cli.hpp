#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rkl::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kCompute = 2;
inline constexpr int kPropertyFailure = 3;

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rkl::cli
