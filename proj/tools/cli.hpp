#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ragmi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line; args[0] is the program name. Data files go under
/// --out, human-readable summaries to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ragmi::cli
