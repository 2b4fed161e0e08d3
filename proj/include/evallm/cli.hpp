// Command-line entry point, callable in-process for tests.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evallm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name. Errors are written to `err` as one line:
///   evallm: error[<code>]: <message>
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace evallm
