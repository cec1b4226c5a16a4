#include "convreg/regularizers.hpp"

#include <algorithm>
#include <sstream>

#include "convreg/structured_matrix.hpp"

namespace convreg {

std::string_view to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::Frobenius: return "frob";
        case PenaltyKind::NegSigmaMin: return "sigma-min";
        case PenaltyKind::Combined: return "combined";
    }
    return "unknown";
}

std::optional<PenaltyKind> parse_penalty_kind(std::string_view name) {
    if (name == "frob") return PenaltyKind::Frobenius;
    if (name == "sigma-min") return PenaltyKind::NegSigmaMin;
    if (name == "combined") return PenaltyKind::Combined;
    return std::nullopt;
}

double combined_weight(const ProblemDims& dims) {
    return static_cast<double>(std::min(dims.g, dims.h) * dims.plane());
}

namespace {

ProblemDims dims_of(const KernelTensor& kernel, std::size_t N) {
    return ProblemDims(N, kernel.k(), kernel.g(), kernel.h());
}

}  // namespace

double frob_penalty(const KernelTensor& kernel, std::size_t N) {
    const ProblemDims dims = dims_of(kernel, N);
    double sum = 0.0;
    for (std::size_t y = 1; y <= dims.h; ++y)
        for (std::size_t z = 1; z <= dims.g; ++z)
            for (std::size_t q = 1; q <= dims.k; ++q)
                for (std::size_t p = 1; p <= dims.k; ++p) {
                    const double v = kernel(p, q, z, y);
                    sum += static_cast<double>(omega_count(dims, p, q)) * v * v;
                }
    return 0.5 * sum;
}

GradientTensor frob_gradient(const KernelTensor& kernel, std::size_t N) {
    const ProblemDims dims = dims_of(kernel, N);
    GradientTensor grad(kernel.shape());
    for (std::size_t y = 1; y <= dims.h; ++y)
        for (std::size_t z = 1; z <= dims.g; ++z)
            for (std::size_t q = 1; q <= dims.k; ++q)
                for (std::size_t p = 1; p <= dims.k; ++p)
                    grad(p, q, z, y) = static_cast<double>(omega_count(dims, p, q)) * kernel(p, q, z, y);
    return grad;
}

GradientTensor sigma_min_gradient(const KernelTensor& kernel, std::size_t N, const SpectralPair& pair,
                                  double sigma_max, double gap_threshold) {
    const ProblemDims dims = dims_of(kernel, N);
    if (simplicity_check(pair, gap_threshold, sigma_max) == Simplicity::degenerate) {
        std::ostringstream msg;
        msg << "sigma_min is not simple and positive (sigma=" << pair.sigma << ", gap=" << pair.gap
            << ", threshold=" << gap_threshold << "); gradient refused";
        throw DegenerateSpectrum(msg.str());
    }
    if (static_cast<std::size_t>(pair.u.size()) != dims.n_out() ||
        static_cast<std::size_t>(pair.v.size()) != dims.n_in())
        throw ShapeError("sigma_min_gradient: singular vectors do not match the kernel's matrix");

    GradientTensor grad(kernel.shape());
    for (std::size_t lin = 0; lin < grad.size(); ++lin) {
        const KernelIndex idx = grad.multi_index(lin);
        double acc = 0.0;
        for_each_omega_position(dims, idx, [&](std::size_t row, std::size_t col) {
            acc += pair.u(static_cast<Eigen::Index>(row - 1)) * pair.v(static_cast<Eigen::Index>(col - 1));
        });
        grad.values()[lin] = acc;
    }
    return grad;
}

GradientTensor combined_gradient(const KernelTensor& kernel, std::size_t N, const SpectralPair& pair,
                                 double sigma_max, double gap_threshold) {
    const double weight = combined_weight(dims_of(kernel, N));
    GradientTensor grad = frob_gradient(kernel, N);
    const GradientTensor sg = sigma_min_gradient(kernel, N, pair, sigma_max, gap_threshold);
    auto out = grad.values();
    auto s = sg.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= weight * s[i];
    return grad;
}

double penalty_value(const KernelTensor& kernel, std::size_t N, PenaltyKind kind, const ExtremePairs& pairs) {
    switch (kind) {
        case PenaltyKind::Frobenius: return frob_penalty(kernel, N);
        case PenaltyKind::NegSigmaMin: return -pairs.min.sigma;
        case PenaltyKind::Combined:
            return frob_penalty(kernel, N) - combined_weight(dims_of(kernel, N)) * pairs.min.sigma;
    }
    return 0.0;
}

double penalty_value(const KernelTensor& kernel, std::size_t N, PenaltyKind kind) {
    if (!needs_sigma_min(kind)) return frob_penalty(kernel, N);
    return penalty_value(kernel, N, kind, extreme_singular_pairs(build_multi(kernel, N)));
}

GradientTensor penalty_gradient(const KernelTensor& kernel, std::size_t N, PenaltyKind kind,
                                const ExtremePairs& pairs, double gap_threshold) {
    switch (kind) {
        case PenaltyKind::Frobenius: return frob_gradient(kernel, N);
        case PenaltyKind::NegSigmaMin: {
            GradientTensor g = sigma_min_gradient(kernel, N, pairs.min, pairs.max.sigma, gap_threshold);
            for (double& v : g.values()) v = -v;
            return g;
        }
        case PenaltyKind::Combined: return combined_gradient(kernel, N, pairs.min, pairs.max.sigma, gap_threshold);
    }
    return GradientTensor(kernel.shape());
}

}  // namespace convreg
