#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latefuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Data goes to
/// files; `out` only receives --print-report and help text, `err` every
/// diagnostic.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latefuse::cli
