#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "convreg/structured_matrix.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

// Independent oracles. None of these share a code path with the function
// they check: finite differences go through penalty evaluations, Omega is
// scanned from an explicit one-hot build, and the matrix-free operator is
// compared against the explicit sparse matrix.

/// Evaluated in extended precision so that difference quotients of
/// double-valued penalties are not limited by the final rounding.
using KernelFunctional = std::function<long double(const KernelTensor&)>;

/// Central differences (f(K + eps e) - f(K - eps e)) / (2 eps) for every entry.
/// The denominator is the realized step (x + eps) - (x - eps).
GradientTensor fd_gradient(const KernelFunctional& penalty, const KernelTensor& kernel, double eps);

/// Omega from the nonzero positions of build_multi(one_hot(index), N).
OmegaIndexSet omega_scan(const ProblemDims& dims, const KernelIndex& index);

/// 1/2 |M|_F^2 summed in extended precision over the entries of the explicit matrix.
long double explicit_frob_penalty(const KernelTensor& kernel, std::size_t N);

/// Smallest singular value of the explicit dense matrix by two-sided Jacobi SVD.
double explicit_sigma_min(const KernelTensor& kernel, std::size_t N);

/// All singular values of the explicit dense matrix by two-sided Jacobi SVD, descending.
std::vector<double> explicit_singular_values(const KernelTensor& kernel, std::size_t N);

struct MatvecReport {
    double max_rel_error = 0.0;
    int cases = 0;
    bool pass = false;
};

/// Compares apply_operator with the explicit matrix on `trials` random inputs
/// plus one-hot inputs at every corner of every channel. Relative error is
/// |Mx - conv| / |conv|, or |Mx - conv| when conv is zero.
MatvecReport matvec_equivalence_report(const KernelTensor& kernel, std::size_t N, int trials,
                                       std::uint64_t seed = 1, double tol = 1e-12);

/// |fd - analytic| <= rtol |analytic| + atol for every entry.
struct GradientComparison {
    double max_rel_error = 0.0;  // max |fd - an| / max(|an|, atol / rtol)
    double max_abs_error = 0.0;
    bool pass = true;
};

GradientComparison compare_gradients(const GradientTensor& analytic, const GradientTensor& fd, double rtol,
                                     double atol);

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    std::string detail;
};

struct VerifyOptions {
    std::size_t grid_max_n = 8;
    int matvec_trials = 20;
    int gradient_kernels = 20;
    std::uint64_t seed = 7;
    /// Negative control: corrupt the analytic side of each check so the suite must fail.
    bool inject_fault = false;
};

/// The full oracle suite over k in {1,3,5}, N in {3..grid_max_n}, g, h in {1,2,3}.
std::vector<CheckResult> run_verify(const VerifyOptions& options);

/// One `PASS`/`FAIL` line per check with its worst-case discrepancy.
void print_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace convreg
