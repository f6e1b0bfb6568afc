#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cps {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // run failed or an invariant audit failed
inline constexpr int kExitUsage = 2;    // bad arguments, unreadable or invalid config

// Entry point shared by the `cps` binary and the tests. args[0] is the
// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cps
