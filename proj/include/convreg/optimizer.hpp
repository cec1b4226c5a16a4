#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "convreg/regularizers.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

/// Run until max_iters updates have been applied.
struct FixedIterations {};

/// Stop once sigma_max <= hi and sigma_min >= lo.
struct SigmaBand {
    double lo = 0.0;
    double hi = 0.0;
};

/// Stop once the gradient norm drops to threshold or below.
struct GradNormBelow {
    double threshold = 0.0;
};

using StopRule = std::variant<FixedIterations, SigmaBand, GradNormBelow>;

enum class SvdBackend { dense, iterative };

struct GdConfig {
    PenaltyKind kind = PenaltyKind::Frobenius;
    double lr = 1e-5;
    int max_iters = 100;
    StopRule stop = FixedIterations{};
    int trace_every = 1;
    std::uint64_t seed = 1;
    SvdBackend svd = SvdBackend::dense;
    double gap_threshold = kDefaultGapThreshold;

    /// Throws std::invalid_argument on a bad field.
    void validate() const;
};

struct TraceRecord {
    int iter = 0;
    double penalty = 0.0;
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

/// Per-iteration history; record `iter` is the state after `iter` updates.
struct Trace {
    std::vector<TraceRecord> records;

    /// CSV with header `iter,penalty,sigma_max,sigma_min,grad_norm,wall_ms` and 17 significant digits.
    /// With include_wall_ms = false the last column is dropped (for reproducibility checks).
    void write_csv(std::ostream& os, bool include_wall_ms = true) const;
};

enum class RunStatus { converged, max_iters, degenerate_sigma };

std::string_view to_string(RunStatus status);

struct RunResult {
    KernelTensor kernel;
    Trace trace;
    RunStatus status = RunStatus::max_iters;
    int updates = 0;
    std::string message;
};

/// Fixed-step gradient descent K <- K - lr * G on the configured penalty.
///
/// The trace holds iteration 0, every trace_every-th iteration, and the final
/// one. A degenerate sigma_min in a sigma_min-dependent run ends the run with
/// status degenerate_sigma; the kernel and trace up to that point are kept.
RunResult run(const KernelTensor& initial, std::size_t N, const GdConfig& cfg);

/// Extreme singular pairs with the configured backend.
ExtremePairs spectrum(const KernelTensor& kernel, std::size_t N, SvdBackend backend);

enum class InitScheme { uniform01, file };

/// Kernel with entries i.i.d. uniform on [0, 1).
///
/// Uses std::mt19937_64 seeded with `seed`; each entry is the top 53 bits of
/// one draw scaled by 2^-53, filled in storage order (p fastest). The stream
/// is fully specified, so kernels are reproducible across platforms.
KernelTensor uniform_kernel(KernelShape shape, std::uint64_t seed);

/// uniform01 draws with `seed`; file loads `path` and checks its shape against `shape`.
KernelTensor init_kernel(KernelShape shape, std::uint64_t seed, InitScheme scheme,
                         const std::optional<std::string>& path = std::nullopt);

}  // namespace convreg
