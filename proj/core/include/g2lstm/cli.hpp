#pragma once

#include <string>
#include <vector>

namespace g2lstm::cli {

/// Dispatches the train/eval/compress/gate-stats/trace/verify-gumbel/gradcheck
/// subcommands. Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace g2lstm::cli
