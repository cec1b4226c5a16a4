#include "convreg/structured_matrix.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <tuple>

namespace convreg {

StructuredMatrix::StructuredMatrix(ProblemDims dims, std::vector<MatrixEntry> entries)
    : dims_(dims), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.row < 1 || e.row > rows() || e.col < 1 || e.col > cols())
            throw ShapeError("structured matrix: entry outside " + std::to_string(rows()) + "x" +
                             std::to_string(cols()));
        if (i > 0) {
            const auto& prev = entries_[i - 1];
            if (std::tie(prev.row, prev.col) >= std::tie(e.row, e.col))
                throw ShapeError("structured matrix: entries must be strictly sorted by (row, col)");
        }
    }
}

std::vector<double> StructuredMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols()) throw ShapeError("structured matrix: multiply length mismatch");
    std::vector<double> y(rows(), 0.0);
    for (const auto& e : entries_) y[e.row - 1] += e.value * x[e.col - 1];
    return y;
}

std::vector<double> StructuredMatrix::multiply_transpose(std::span<const double> y) const {
    if (y.size() != rows()) throw ShapeError("structured matrix: transpose multiply length mismatch");
    std::vector<double> x(cols(), 0.0);
    for (const auto& e : entries_) x[e.col - 1] += e.value * y[e.row - 1];
    return x;
}

Eigen::MatrixXd StructuredMatrix::to_dense() const {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                                  static_cast<Eigen::Index>(cols()));
    for (const auto& e : entries_)
        dense(static_cast<Eigen::Index>(e.row - 1), static_cast<Eigen::Index>(e.col - 1)) = e.value;
    return dense;
}

Eigen::SparseMatrix<double> StructuredMatrix::to_sparse() const {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(entries_.size());
    for (const auto& e : entries_)
        triplets.emplace_back(static_cast<int>(e.row - 1), static_cast<int>(e.col - 1), e.value);
    Eigen::SparseMatrix<double> sparse(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
    sparse.setFromTriplets(triplets.begin(), triplets.end());
    return sparse;
}

StructuredMatrix build_single(const KernelTensor& kernel, std::size_t N) {
    if (kernel.g() != 1 || kernel.h() != 1)
        throw ShapeError("build_single: kernel must have a single input and output channel");
    return build_multi(kernel, N);
}

StructuredMatrix build_multi(const KernelTensor& kernel, std::size_t N) {
    const ProblemDims dims(N, kernel.k(), kernel.g(), kernel.h());
    const long n = static_cast<long>(N);
    const long m = static_cast<long>(dims.m());
    const long k = static_cast<long>(dims.k);

    std::vector<MatrixEntry> entries;
    entries.reserve(dims.n_out() * dims.g * dims.k * dims.k);

    // Rows in vec order (c, s, r); within a row, columns in vec order (d, j, i).
    // j = s - m + q and i = r - m + p grow with q and p, so no sort is needed.
    for (std::size_t c = 1; c <= dims.h; ++c) {
        for (long s = 1; s <= n; ++s) {
            for (long r = 1; r <= n; ++r) {
                const std::size_t row = (c - 1) * dims.plane() + static_cast<std::size_t>((s - 1) * n + r);
                for (std::size_t d = 1; d <= dims.g; ++d) {
                    for (long q = 1; q <= k; ++q) {
                        const long j = s - m + q;
                        if (j < 1 || j > n) continue;
                        for (long p = 1; p <= k; ++p) {
                            const long i = r - m + p;
                            if (i < 1 || i > n) continue;
                            const double value = kernel(static_cast<std::size_t>(p), static_cast<std::size_t>(q), d, c);
                            if (value == 0.0) continue;
                            const std::size_t col =
                                (d - 1) * dims.plane() + static_cast<std::size_t>((j - 1) * n + i);
                            entries.push_back({row, col, value});
                        }
                    }
                }
            }
        }
    }
    return StructuredMatrix(dims, std::move(entries));
}

std::size_t omega_count(const ProblemDims& dims, std::size_t p, std::size_t q) {
    const long n = static_cast<long>(dims.N);
    const long m = static_cast<long>(dims.m());
    const long rows = std::max(0L, n - std::labs(static_cast<long>(p) - m));
    const long cols = std::max(0L, n - std::labs(static_cast<long>(q) - m));
    return static_cast<std::size_t>(rows * cols);
}

OmegaIndexSet omega(const ProblemDims& dims, const KernelIndex& index) {
    if (index.p < 1 || index.p > dims.k || index.q < 1 || index.q > dims.k || index.z < 1 ||
        index.z > dims.g || index.y < 1 || index.y > dims.h)
        throw ShapeError("omega: kernel index out of range");
    OmegaIndexSet set{index, {}};
    set.positions.reserve(omega_count(dims, index.p, index.q));
    for_each_omega_position(dims, index, [&](std::size_t row, std::size_t col) {
        set.positions.push_back({row, col});
    });
    return set;
}

double frobenius_norm_sq(const StructuredMatrix& M) {
    double sum = 0.0;
    for (const auto& e : M.entries()) sum += e.value * e.value;
    return sum;
}

BlockBandwidth block_bandwidth(const StructuredMatrix& M) {
    const long n = static_cast<long>(M.dims().N);
    const long plane = n * n;
    BlockBandwidth bw;
    for (const auto& e : M.entries()) {
        const long row = static_cast<long>(e.row - 1) % plane;
        const long col = static_cast<long>(e.col - 1) % plane;
        const long outer = row / n - col / n;
        const long inner = row % n - col % n;
        bw.outer_lower = std::max(bw.outer_lower, outer);
        bw.outer_upper = std::max(bw.outer_upper, -outer);
        bw.inner_lower = std::max(bw.inner_lower, inner);
        bw.inner_upper = std::max(bw.inner_upper, -inner);
    }
    return bw;
}

void write_matrix_market(std::ostream& os, const StructuredMatrix& M) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << "% convolution matrix, " << M.dims() << '\n';
    os << M.rows() << ' ' << M.cols() << ' ' << M.nnz() << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& e : M.entries()) os << e.row << ' ' << e.col << ' ' << e.value << '\n';
}

void save_matrix_market(const std::string& path, const StructuredMatrix& M) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_matrix_market(out, M);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace convreg
