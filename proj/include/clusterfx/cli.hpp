#pragma once

// Command-line front end: simulate, analyze, bootstrap, validate, oracle.
// Exit codes: 0 success, 1 validation tolerance failure, 2 usage/config/I/O error.

#include <ostream>
#include <string>
#include <vector>

namespace clusterfx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailed = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clusterfx
