#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace harnack::cli {

// Exit codes.
inline constexpr int kHolds = 0;
inline constexpr int kError = 1;
inline constexpr int kViolated = 2;
inline constexpr int kInconclusive = 3;

// Runs one harnack_lab invocation; args excludes the program name, e.g.
// {"bounds", "--config", "x.cfg"}.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(const std::vector<std::string>& args);

const char* version();

} // namespace harnack::cli
