#pragma once

#include <iosfwd>

namespace convreg::cli {

/// Exit codes of the `convreg` tool.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,         ///< I/O error, bad input file, spectral failure
    kDegenerateSigma = 2, ///< run stopped on a degenerate sigma_min
    kVerifyFailed = 3,    ///< at least one oracle check failed
};

/// Entry point shared by the executable and the tests.
///
/// Subcommands: `run` (gradient descent experiment), `verify` (oracle suite)
/// and `inspect` (structure and extreme singular values of M).
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace convreg::cli
