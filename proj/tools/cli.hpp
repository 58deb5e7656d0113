#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace conceptgcn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// `args` excludes the program name. Never throws; the return value is the
// process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conceptgcn::cli
