#include "convreg/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "convreg/structured_matrix.hpp"

namespace convreg {

void GdConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive and finite");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
    if (trace_every < 1) throw std::invalid_argument("trace_every must be at least 1");
    if (!(gap_threshold > 0.0)) throw std::invalid_argument("gap threshold must be positive");
    if (const auto* band = std::get_if<SigmaBand>(&stop); band && !(band->lo < band->hi))
        throw std::invalid_argument("sigma band requires lo < hi");
    if (const auto* gn = std::get_if<GradNormBelow>(&stop); gn && !(gn->threshold > 0.0))
        throw std::invalid_argument("gradient-norm threshold must be positive");
}

void Trace::write_csv(std::ostream& os, bool include_wall_ms) const {
    os << "iter,penalty,sigma_max,sigma_min,grad_norm";
    if (include_wall_ms) os << ",wall_ms";
    os << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : records) {
        os << r.iter << ',' << r.penalty << ',' << r.sigma_max << ',' << r.sigma_min << ',' << r.grad_norm;
        if (include_wall_ms) os << ',' << r.wall_ms;
        os << '\n';
    }
}

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::converged: return "converged";
        case RunStatus::max_iters: return "max-iters";
        case RunStatus::degenerate_sigma: return "degenerate-sigma";
    }
    return "unknown";
}

ExtremePairs spectrum(const KernelTensor& kernel, std::size_t N, SvdBackend backend) {
    if (backend == SvdBackend::dense) return extreme_singular_pairs(build_multi(kernel, N));
    return extreme_singular_pairs_iterative(kernel, N);
}

RunResult run(const KernelTensor& initial, std::size_t N, const GdConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const bool band_rule = std::holds_alternative<SigmaBand>(cfg.stop);

    RunResult result;
    result.kernel = initial;

    for (int t = 0;; ++t) {
        const bool last = t == cfg.max_iters;
        const bool record = last || t % cfg.trace_every == 0;
        const bool want_spectrum = needs_sigma_min(cfg.kind) || record || band_rule;

        ExtremePairs pairs;
        if (want_spectrum) pairs = spectrum(result.kernel, N, cfg.svd);

        GradientTensor grad;
        try {
            grad = penalty_gradient(result.kernel, N, cfg.kind, pairs, cfg.gap_threshold);
        } catch (const DegenerateSpectrum& e) {
            result.status = RunStatus::degenerate_sigma;
            result.message = std::string("iteration ") + std::to_string(t) + ": " + e.what();
            break;
        }
        const double grad_norm = flat_norm(grad);

        bool converged = false;
        if (const auto* band = std::get_if<SigmaBand>(&cfg.stop))
            converged = pairs.max.sigma <= band->hi && pairs.min.sigma >= band->lo;
        else if (const auto* gn = std::get_if<GradNormBelow>(&cfg.stop))
            converged = grad_norm <= gn->threshold;

        if (record || converged) {
            TraceRecord rec;
            rec.iter = t;
            rec.penalty = penalty_value(result.kernel, N, cfg.kind, pairs);
            rec.sigma_max = pairs.max.sigma;
            rec.sigma_min = pairs.min.sigma;
            rec.grad_norm = grad_norm;
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            result.trace.records.push_back(rec);
        }
        if (converged) {
            result.status = RunStatus::converged;
            break;
        }
        if (last) {
            result.status = RunStatus::max_iters;
            break;
        }
        result.kernel = descend(result.kernel, grad, cfg.lr);
        result.updates = t + 1;
    }
    return result;
}

KernelTensor uniform_kernel(KernelShape shape, std::uint64_t seed) {
    KernelTensor kernel(shape);
    std::mt19937_64 rng(seed);
    for (double& v : kernel.values()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return kernel;
}

KernelTensor init_kernel(KernelShape shape, std::uint64_t seed, InitScheme scheme,
                         const std::optional<std::string>& path) {
    switch (scheme) {
        case InitScheme::uniform01: return uniform_kernel(shape, seed);
        case InitScheme::file: {
            if (!path) throw std::invalid_argument("init_kernel: file scheme requires a path");
            KernelTensor kernel = load_kernel(*path);
            if (kernel.shape() != shape)
                throw ShapeError(*path + ": kernel shape " + std::to_string(kernel.k()) + "x" +
                                 std::to_string(kernel.k()) + "x" + std::to_string(kernel.g()) + "x" +
                                 std::to_string(kernel.h()) + " does not match the requested shape");
            return kernel;
        }
    }
    throw std::invalid_argument("init_kernel: unknown scheme");
}

}  // namespace convreg
