#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fvp::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Dispatches gen-data, pretrain, adapt, eval, ablate and render. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace fvp::tools
