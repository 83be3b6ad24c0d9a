#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evfuse::cli {

// Exit codes: 0 success, 2 usage/validation, 3 numeric or fusion failure,
// 4 IO, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

// `args` excludes the program name. Machine-readable output goes to `out`,
// logs and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace evfuse::cli
