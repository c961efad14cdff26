#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace newsclip {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;  // validation or audit found problems
inline constexpr int kExitBadInput = 2;  // configuration or input error

// Entry point of the newsclip tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace newsclip
