#pragma once

#include <span>
#include <vector>

#include "convreg/tensor.hpp"

namespace convreg {

// Zero-padded "same" convolution with unit stride and no kernel flip:
//
//   Y(r, s, c) = sum_d sum_q sum_p X(r - m + p, s - m + q, d) * K(p, q, d, c)
//
// with X taken as zero outside 1..N. Taps are accumulated d outer, then q,
// then p, so results are reproducible bit for bit.

/// Single-channel convolution; requires g = h = 1 on both operands.
OutputTensor conv_single(const KernelTensor& kernel, const InputTensor& x);

/// Multi-channel convolution; requires x.channels() == kernel.g().
OutputTensor conv_multi(const KernelTensor& kernel, const InputTensor& x);

/// Matrix-free M * v, where v has length g N^2 and the result h N^2.
std::vector<double> apply_operator(const KernelTensor& kernel, std::size_t N, std::span<const double> v);

/// Matrix-free M^T * w, where w has length h N^2 and the result g N^2.
std::vector<double> apply_adjoint(const KernelTensor& kernel, std::size_t N, std::span<const double> w);

}  // namespace convreg
