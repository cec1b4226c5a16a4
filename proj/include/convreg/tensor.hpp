#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace convreg {

/// Raised when a tensor, vector or file does not have the shape an operation expects.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a tensor file cannot be parsed.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sizes of one convolution problem.
///
/// N is the spatial side of input and output, k the filter side, g the number
/// of input channels and h the number of output channels. The center offset
/// m is the smallest integer >= k/2.
struct ProblemDims {
    std::size_t N = 0;
    std::size_t k = 0;
    std::size_t g = 0;
    std::size_t h = 0;

    ProblemDims() = default;
    ProblemDims(std::size_t N_, std::size_t k_, std::size_t g_, std::size_t h_);

    std::size_t m() const noexcept { return (k + 1) / 2; }
    std::size_t plane() const noexcept { return N * N; }
    std::size_t n_in() const noexcept { return g * N * N; }
    std::size_t n_out() const noexcept { return h * N * N; }

    bool operator==(const ProblemDims&) const = default;
};

std::ostream& operator<<(std::ostream& os, const ProblemDims& dims);

/// Shape of a k x k x g x h kernel.
struct KernelShape {
    std::size_t k = 0;
    std::size_t g = 0;
    std::size_t h = 0;

    std::size_t size() const noexcept { return k * k * g * h; }
    bool operator==(const KernelShape&) const = default;
};

/// 1-based multi-index (p, q, z, y) into a kernel.
struct KernelIndex {
    std::size_t p = 1;
    std::size_t q = 1;
    std::size_t z = 1;
    std::size_t y = 1;

    bool operator==(const KernelIndex&) const = default;
};

namespace detail {
struct KernelTag {};
struct GradientTag {};
}  // namespace detail

/// A real k x k x g x h array addressed with 1-based (p, q, z, y).
///
/// Storage is linear with p varying fastest, then q, z and y. The same order
/// is used by the text file format. The Tag parameter keeps kernels and
/// gradients from being mixed up by accident.
template <class Tag>
class KernelArray {
public:
    KernelArray() = default;

    explicit KernelArray(KernelShape shape)
        : shape_(validated(shape)), values_(shape.size(), 0.0) {}

    KernelArray(KernelShape shape, std::vector<double> values)
        : shape_(validated(shape)), values_(std::move(values)) {
        if (values_.size() != shape_.size())
            throw ShapeError("kernel array: expected " + std::to_string(shape_.size()) +
                             " values, got " + std::to_string(values_.size()));
    }

    const KernelShape& shape() const noexcept { return shape_; }
    std::size_t k() const noexcept { return shape_.k; }
    std::size_t g() const noexcept { return shape_.g; }
    std::size_t h() const noexcept { return shape_.h; }
    std::size_t size() const noexcept { return values_.size(); }

    std::size_t linear_index(std::size_t p, std::size_t q, std::size_t z, std::size_t y) const noexcept {
        return (p - 1) + shape_.k * ((q - 1) + shape_.k * ((z - 1) + shape_.g * (y - 1)));
    }

    KernelIndex multi_index(std::size_t linear) const noexcept {
        KernelIndex idx;
        idx.p = linear % shape_.k + 1;
        linear /= shape_.k;
        idx.q = linear % shape_.k + 1;
        linear /= shape_.k;
        idx.z = linear % shape_.g + 1;
        idx.y = linear / shape_.g + 1;
        return idx;
    }

    double& operator()(std::size_t p, std::size_t q, std::size_t z = 1, std::size_t y = 1) noexcept {
        return values_[linear_index(p, q, z, y)];
    }
    double operator()(std::size_t p, std::size_t q, std::size_t z = 1, std::size_t y = 1) const noexcept {
        return values_[linear_index(p, q, z, y)];
    }
    double& operator[](const KernelIndex& i) noexcept { return (*this)(i.p, i.q, i.z, i.y); }
    double operator[](const KernelIndex& i) const noexcept { return (*this)(i.p, i.q, i.z, i.y); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const KernelArray&) const = default;

private:
    static KernelShape validated(KernelShape s) {
        if (s.k == 0 || s.g == 0 || s.h == 0)
            throw ShapeError("kernel array: k, g and h must be positive");
        return s;
    }

    KernelShape shape_{};
    std::vector<double> values_;
};

using KernelTensor = KernelArray<detail::KernelTag>;
using GradientTensor = KernelArray<detail::GradientTag>;

/// Single-entry kernel with value 1 at idx.
KernelTensor one_hot(KernelShape shape, const KernelIndex& idx);

/// Kernel whose every (z, y) slice has 1 at the center tap (m, m) only.
/// With g = h = 1 this is the identity convolution.
KernelTensor identity_center(KernelShape shape);

template <class Tag>
bool all_finite(const KernelArray<Tag>& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

/// Euclidean norm of the array viewed as a flat vector.
template <class Tag>
double flat_norm(const KernelArray<Tag>& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

/// K - lr * G.
KernelTensor descend(const KernelTensor& kernel, const GradientTensor& grad, double lr);

/// N x N x C spatial tensor addressed with 1-based (i, j, d).
///
/// Storage is the vec order: column-major within a channel, channels stacked.
template <class Tag>
class SpatialTensor {
public:
    SpatialTensor() = default;

    SpatialTensor(std::size_t N, std::size_t channels)
        : N_(N), channels_(channels), values_(N * N * channels, 0.0) {
        if (N == 0 || channels == 0)
            throw ShapeError("spatial tensor: N and channel count must be positive");
    }

    std::size_t N() const noexcept { return N_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return values_.size(); }

    /// 0-based position of X(i, j, d) in vec order.
    std::size_t vec_position(std::size_t i, std::size_t j, std::size_t d) const noexcept {
        return (d - 1) * N_ * N_ + (j - 1) * N_ + (i - 1);
    }

    double& operator()(std::size_t i, std::size_t j, std::size_t d = 1) noexcept {
        return values_[vec_position(i, j, d)];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t d = 1) const noexcept {
        return values_[vec_position(i, j, d)];
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const SpatialTensor&) const = default;

private:
    std::size_t N_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

namespace detail {
struct InputTag {};
struct OutputTag {};
}  // namespace detail

using InputTensor = SpatialTensor<detail::InputTag>;
using OutputTensor = SpatialTensor<detail::OutputTag>;

std::vector<double> vec_input(const InputTensor& x);
std::vector<double> vec_output(const OutputTensor& y);
InputTensor unvec_input(std::span<const double> v, const ProblemDims& dims);
OutputTensor unvec_output(std::span<const double> v, const ProblemDims& dims);

// Text format: a header line of integers (`k k g h` or `N N g`) followed by
// whitespace-separated values with the first index varying fastest.

void write_kernel(std::ostream& os, const KernelTensor& kernel);
KernelTensor read_kernel(std::istream& is);
void save_kernel(const std::string& path, const KernelTensor& kernel);
KernelTensor load_kernel(const std::string& path);

void write_input(std::ostream& os, const InputTensor& x);
InputTensor read_input(std::istream& is);

}  // namespace convreg
