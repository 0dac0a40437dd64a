#pragma once

#include <string>
#include <vector>

namespace streamvae::cli {

/// Runs the command line; returns the process exit code (0 ok, 2 config
/// error, 3 data error, 4 numerical failure).
int run(int argc, const char* const* argv);
/// Same with argv[0] omitted.
int run(const std::vector<std::string>& args);

}  // namespace streamvae::cli
