#include "convreg/conv.hpp"

#include <string>

namespace convreg {

namespace {

// Signed offset of tap p relative to the output position: input row = r + p - m.
inline long tap_offset(std::size_t p, std::size_t m) {
    return static_cast<long>(p) - static_cast<long>(m);
}

void convolve(const KernelTensor& kernel, std::size_t N, std::span<const double> x, std::span<double> y) {
    const std::size_t k = kernel.k();
    const std::size_t m = (k + 1) / 2;
    const long n = static_cast<long>(N);
    const std::size_t plane = N * N;

    for (std::size_t c = 1; c <= kernel.h(); ++c) {
        double* out = y.data() + (c - 1) * plane;
        for (long s = 1; s <= n; ++s) {
            for (long r = 1; r <= n; ++r) {
                double acc = 0.0;
                for (std::size_t d = 1; d <= kernel.g(); ++d) {
                    const double* in = x.data() + (d - 1) * plane;
                    for (std::size_t q = 1; q <= k; ++q) {
                        const long j = s + tap_offset(q, m);
                        if (j < 1 || j > n) continue;
                        for (std::size_t p = 1; p <= k; ++p) {
                            const long i = r + tap_offset(p, m);
                            if (i < 1 || i > n) continue;
                            acc += in[(j - 1) * n + (i - 1)] * kernel(p, q, d, c);
                        }
                    }
                }
                out[(s - 1) * n + (r - 1)] = acc;
            }
        }
    }
}

// Gather form of the transpose: X'(i, j, d) = sum_c sum_q sum_p W(i - p + m, j - q + m, c) K(p, q, d, c).
void correlate_adjoint(const KernelTensor& kernel, std::size_t N, std::span<const double> w,
                       std::span<double> x) {
    const std::size_t k = kernel.k();
    const std::size_t m = (k + 1) / 2;
    const long n = static_cast<long>(N);
    const std::size_t plane = N * N;

    for (std::size_t d = 1; d <= kernel.g(); ++d) {
        double* out = x.data() + (d - 1) * plane;
        for (long j = 1; j <= n; ++j) {
            for (long i = 1; i <= n; ++i) {
                double acc = 0.0;
                for (std::size_t c = 1; c <= kernel.h(); ++c) {
                    const double* in = w.data() + (c - 1) * plane;
                    for (std::size_t q = 1; q <= k; ++q) {
                        const long s = j - tap_offset(q, m);
                        if (s < 1 || s > n) continue;
                        for (std::size_t p = 1; p <= k; ++p) {
                            const long r = i - tap_offset(p, m);
                            if (r < 1 || r > n) continue;
                            acc += in[(s - 1) * n + (r - 1)] * kernel(p, q, d, c);
                        }
                    }
                }
                out[(j - 1) * n + (i - 1)] = acc;
            }
        }
    }
}

void check_length(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ShapeError(std::string(what) + ": expected vector of length " + std::to_string(want) +
                         ", got " + std::to_string(got));
}

}  // namespace

OutputTensor conv_single(const KernelTensor& kernel, const InputTensor& x) {
    if (kernel.g() != 1 || kernel.h() != 1 || x.channels() != 1)
        throw ShapeError("conv_single: kernel and input must both have a single channel");
    return conv_multi(kernel, x);
}

OutputTensor conv_multi(const KernelTensor& kernel, const InputTensor& x) {
    if (x.channels() != kernel.g())
        throw ShapeError("conv_multi: input has " + std::to_string(x.channels()) +
                         " channels but kernel expects " + std::to_string(kernel.g()));
    OutputTensor y(x.N(), kernel.h());
    convolve(kernel, x.N(), x.values(), y.values());
    return y;
}

std::vector<double> apply_operator(const KernelTensor& kernel, std::size_t N, std::span<const double> v) {
    check_length(v.size(), kernel.g() * N * N, "apply_operator");
    std::vector<double> out(kernel.h() * N * N);
    convolve(kernel, N, v, out);
    return out;
}

std::vector<double> apply_adjoint(const KernelTensor& kernel, std::size_t N, std::span<const double> w) {
    check_length(w.size(), kernel.h() * N * N, "apply_adjoint");
    std::vector<double> out(kernel.g() * N * N);
    correlate_adjoint(kernel, N, w, out);
    return out;
}

}  // namespace convreg
