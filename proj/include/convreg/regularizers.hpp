#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>

#include "convreg/spectral.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

/// The three penalties on the convolution matrix M of a kernel K.
enum class PenaltyKind {
    Frobenius,    ///< 1/2 |M|_F^2
    NegSigmaMin,  ///< -sigma_min(M)
    Combined,     ///< 1/2 |M|_F^2 - min(g, h) N^2 sigma_min(M)
};

std::string_view to_string(PenaltyKind kind);
std::optional<PenaltyKind> parse_penalty_kind(std::string_view name);

inline bool needs_sigma_min(PenaltyKind kind) { return kind != PenaltyKind::Frobenius; }

/// Weight of the sigma_min term in the combined penalty: min(g, h) * N^2.
double combined_weight(const ProblemDims& dims);

/// Refusal to differentiate sigma_min at a repeated or zero singular value.
class DegenerateSpectrum : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 1/2 sum |Omega_{p,q}| K(p,q,z,y)^2, without building M.
double frob_penalty(const KernelTensor& kernel, std::size_t N);

/// G(p,q,z,y) = |Omega_{p,q}| K(p,q,z,y): every position of Omega holds the same value.
GradientTensor frob_gradient(const KernelTensor& kernel, std::size_t N);

/// G(p,q,z,y) = sum over (i,j) in Omega_{p,q,z,y} of u(i) v(j).
///
/// `pair` must be the sigma_min pair of the kernel's matrix and `sigma_max`
/// its largest singular value. Throws DegenerateSpectrum if the pair fails
/// simplicity_check(pair, gap_threshold, sigma_max).
GradientTensor sigma_min_gradient(const KernelTensor& kernel, std::size_t N, const SpectralPair& pair,
                                  double sigma_max, double gap_threshold = kDefaultGapThreshold);

/// frob_gradient - min(g, h) N^2 * sigma_min_gradient.
GradientTensor combined_gradient(const KernelTensor& kernel, std::size_t N, const SpectralPair& pair,
                                 double sigma_max, double gap_threshold = kDefaultGapThreshold);

/// Penalty value given precomputed spectral pairs.
double penalty_value(const KernelTensor& kernel, std::size_t N, PenaltyKind kind, const ExtremePairs& pairs);

/// Penalty value; computes the dense spectrum when the kind needs sigma_min.
double penalty_value(const KernelTensor& kernel, std::size_t N, PenaltyKind kind);

/// Gradient of the selected penalty. `pairs` is ignored for Frobenius.
GradientTensor penalty_gradient(const KernelTensor& kernel, std::size_t N, PenaltyKind kind,
                                const ExtremePairs& pairs, double gap_threshold = kDefaultGapThreshold);

}  // namespace convreg
