#pragma once

#include <string>
#include <vector>

namespace nlts::cli {

/// Entry point shared by the binary and the in-process tests.
/// Exit codes: 0 success, 2 separation failure, 3 non-convergence/divergence,
/// 4 configuration error, 1 internal error.
int run(int argc, const char* const* argv);

/// Convenience wrapper for tests.
int run(const std::vector<std::string>& args);

} // namespace nlts::cli
