#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "convreg/tensor.hpp"

namespace convreg {

/// 1-based (row, col) position in M.
struct MatrixPosition {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const MatrixPosition&) const = default;
};

struct MatrixEntry {
    std::size_t row = 0;  // 1-based
    std::size_t col = 0;  // 1-based
    double value = 0.0;
};

/// Explicit sparse form of the convolution matrix M, with vec(Y) = M vec(X).
///
/// M is hN^2 x gN^2. Block (c, d), occupying rows (c-1)N^2+1..cN^2 and columns
/// (d-1)N^2+1..dN^2, is the doubly block banded Toeplitz matrix of the kernel
/// slice K(:, :, d, c). Entries are sorted by (row, col) and hold kernel values
/// copied verbatim; positions whose kernel value is exactly zero are not stored.
class StructuredMatrix {
public:
    StructuredMatrix(ProblemDims dims, std::vector<MatrixEntry> entries);

    const ProblemDims& dims() const noexcept { return dims_; }
    std::size_t rows() const noexcept { return dims_.n_out(); }
    std::size_t cols() const noexcept { return dims_.n_in(); }
    std::size_t nnz() const noexcept { return entries_.size(); }
    std::span<const MatrixEntry> entries() const noexcept { return entries_; }

    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> multiply_transpose(std::span<const double> y) const;

    Eigen::MatrixXd to_dense() const;
    Eigen::SparseMatrix<double> to_sparse() const;

private:
    ProblemDims dims_;
    std::vector<MatrixEntry> entries_;
};

StructuredMatrix build_single(const KernelTensor& kernel, std::size_t N);
StructuredMatrix build_multi(const KernelTensor& kernel, std::size_t N);

/// Positions of M holding the kernel entry K(p, q, z, y).
struct OmegaIndexSet {
    KernelIndex index;
    std::vector<MatrixPosition> positions;  // sorted by (row, col)
};

/// |Omega| for taps (p, q): (N - |p - m|)(N - |q - m|), clamped at zero.
std::size_t omega_count(const ProblemDims& dims, std::size_t p, std::size_t q);

/// Omega computed from Toeplitz offset arithmetic.
OmegaIndexSet omega(const ProblemDims& dims, const KernelIndex& index);

/// Visit every (row, col) of Omega without materializing it; positions are 1-based.
template <class Fn>
void for_each_omega_position(const ProblemDims& dims, const KernelIndex& idx, Fn&& fn) {
    const long n = static_cast<long>(dims.N);
    const long dp = static_cast<long>(idx.p) - static_cast<long>(dims.m());
    const long dq = static_cast<long>(idx.q) - static_cast<long>(dims.m());
    const std::size_t row_base = (idx.y - 1) * dims.plane();
    const std::size_t col_base = (idx.z - 1) * dims.plane();
    for (long s = std::max(1L, 1 - dq); s <= std::min(n, n - dq); ++s)
        for (long r = std::max(1L, 1 - dp); r <= std::min(n, n - dp); ++r)
            fn(row_base + static_cast<std::size_t>((s - 1) * n + r),
               col_base + static_cast<std::size_t>((s + dq - 1) * n + (r + dp)));
}

double frobenius_norm_sq(const StructuredMatrix& M);

/// Observed band structure of the channel blocks of M.
///
/// For an entry linking output (r, s) to input (i, j), the outer (block)
/// offset is s - j and the inner offset r - i. The zero-padded convolution
/// gives lower bandwidth m - 1 and upper bandwidth k - m at both levels.
struct BlockBandwidth {
    long outer_lower = 0;
    long outer_upper = 0;
    long inner_lower = 0;
    long inner_upper = 0;
};

BlockBandwidth block_bandwidth(const StructuredMatrix& M);

/// Matrix Market coordinate export (`matrix coordinate real general`, 1-based).
void write_matrix_market(std::ostream& os, const StructuredMatrix& M);
void save_matrix_market(const std::string& path, const StructuredMatrix& M);

}  // namespace convreg
