#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "convreg/structured_matrix.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

/// Raised when a singular value computation fails or cannot be certified.
class SpectralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The dense SVD did not converge or returned a pair that fails its residual check.
class SvdFailure : public SpectralError {
public:
    using SpectralError::SpectralError;
};

/// An iterative solver hit its iteration cap before meeting the tolerance.
class NotConverged : public SpectralError {
public:
    using SpectralError::SpectralError;
};

/// A singular triple (sigma, u, v) with M v = sigma u and M^T u = sigma v.
///
/// residual is max(|M v - sigma u|, |M^T u - sigma v|), measured by direct
/// multiplication. gap is the distance to the nearest other singular value:
/// exact on the dense path, estimated from the convergence rate on the
/// iterative paths (0 when the rate could not be measured).
struct SpectralPair {
    double sigma = 0.0;
    Eigen::VectorXd u;
    Eigen::VectorXd v;
    double residual = 0.0;
    double gap = 0.0;
};

struct ExtremePairs {
    SpectralPair max;
    SpectralPair min;
    /// All min(rows, cols) singular values in descending order (dense path only).
    std::vector<double> singular_values;
};

inline constexpr double kDefaultCertifyTol = 1e-8;
inline constexpr double kDefaultGapThreshold = 1e-8;

/// sigma_max and sigma_min of M from a full dense SVD.
///
/// sigma_min is the min(rows, cols)-th singular value. Both pairs are
/// certified: residual <= certify_tol * sigma_max, otherwise SvdFailure.
ExtremePairs extreme_singular_pairs(const StructuredMatrix& M, double certify_tol = kDefaultCertifyTol);

/// Power iteration on v -> M^T M v using the matrix-free operator.
/// Stops once residual <= tol * sigma; throws NotConverged after max_iter steps.
SpectralPair sigma_max_iterative(const KernelTensor& kernel, std::size_t N, double tol = kDefaultCertifyTol,
                                 int max_iter = 20000);

/// Inverse iteration on the smaller Gram matrix (M^T M or M M^T) with a
/// sparse LDL^T factorization. Stops once residual <= tol * scale; throws
/// NotConverged after max_iter steps and SpectralError if the Gram matrix
/// is numerically singular.
SpectralPair sigma_min_iterative(const KernelTensor& kernel, std::size_t N, double scale,
                                 double tol = kDefaultCertifyTol, int max_iter = 5000);

/// Both extreme pairs via the iterative solvers (singular_values left empty).
/// If M has a zero singular value on its smaller side, min is a zero pair
/// with empty vectors and gap 0, which simplicity_check reports as degenerate.
ExtremePairs extreme_singular_pairs_iterative(const KernelTensor& kernel, std::size_t N,
                                              double certify_tol = kDefaultCertifyTol);

enum class Simplicity { simple, degenerate };

/// degenerate iff gap < threshold * max(sigma_max, 1) or sigma < threshold.
Simplicity simplicity_check(const SpectralPair& pair, double threshold, double sigma_max);

/// max(|M v - sigma u|, |M^T u - sigma v|) computed with the explicit matrix.
double pair_residual(const StructuredMatrix& M, double sigma, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

}  // namespace convreg
