#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wcs::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumericFailure = 1;
inline constexpr int kUsageOrIo = 2;

/// Runs one command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wcs::cli
