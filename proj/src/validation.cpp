#include "convreg/validation.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "convreg/conv.hpp"
#include "convreg/regularizers.hpp"
#include "convreg/spectral.hpp"

namespace convreg {

GradientTensor fd_gradient(const KernelFunctional& penalty, const KernelTensor& kernel, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("fd_gradient: eps must be positive");
    GradientTensor grad(kernel.shape());
    KernelTensor probe = kernel;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        const double x = kernel.values()[i];
        const double xp = x + eps;
        const double xm = x - eps;
        probe.values()[i] = xp;
        const long double plus = penalty(probe);
        probe.values()[i] = xm;
        const long double minus = penalty(probe);
        probe.values()[i] = x;
        // Divide by the step actually taken: xp - xm is exact, 2 eps is not.
        grad.values()[i] = static_cast<double>((plus - minus) / static_cast<long double>(xp - xm));
    }
    return grad;
}

OmegaIndexSet omega_scan(const ProblemDims& dims, const KernelIndex& index) {
    const StructuredMatrix M = build_multi(one_hot({dims.k, dims.g, dims.h}, index), dims.N);
    OmegaIndexSet set{index, {}};
    for (const auto& e : M.entries())
        if (e.value != 0.0) set.positions.push_back({e.row, e.col});
    return set;
}

long double explicit_frob_penalty(const KernelTensor& kernel, std::size_t N) {
    const StructuredMatrix M = build_multi(kernel, N);
    long double sum = 0.0L;
    for (const auto& e : M.entries()) sum += static_cast<long double>(e.value) * e.value;
    return 0.5L * sum;
}

std::vector<double> explicit_singular_values(const KernelTensor& kernel, std::size_t N) {
    const Eigen::MatrixXd dense = build_multi(kernel, N).to_dense();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    const Eigen::VectorXd& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

double explicit_sigma_min(const KernelTensor& kernel, std::size_t N) {
    return explicit_singular_values(kernel, N).back();
}

MatvecReport matvec_equivalence_report(const KernelTensor& kernel, std::size_t N, int trials, std::uint64_t seed,
                                       double tol) {
    if (trials < 1) throw std::invalid_argument("matvec_equivalence_report: trials must be >= 1");
    const StructuredMatrix M = build_multi(kernel, N);
    const std::size_t n_in = kernel.g() * N * N;

    std::vector<std::vector<double>> inputs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(n_in);
        for (double& v : x) v = uni(rng);
        inputs.push_back(std::move(x));
    }
    // Corner one-hots hit every zero-padding branch.
    for (std::size_t d = 0; d < kernel.g(); ++d)
        for (std::size_t corner : {std::size_t{0}, N - 1, N * (N - 1), N * N - 1}) {
            std::vector<double> x(n_in, 0.0);
            x[d * N * N + corner] = 1.0;
            inputs.push_back(std::move(x));
        }

    MatvecReport report;
    for (const auto& x : inputs) {
        const auto fast = apply_operator(kernel, N, x);
        const auto explicit_y = M.multiply(x);
        double diff = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < fast.size(); ++i) {
            diff += (fast[i] - explicit_y[i]) * (fast[i] - explicit_y[i]);
            ref += fast[i] * fast[i];
        }
        diff = std::sqrt(diff);
        ref = std::sqrt(ref);
        report.max_rel_error = std::max(report.max_rel_error, ref > 0.0 ? diff / ref : diff);
        ++report.cases;
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

GradientComparison compare_gradients(const GradientTensor& analytic, const GradientTensor& fd, double rtol,
                                     double atol) {
    if (analytic.shape() != fd.shape()) throw ShapeError("compare_gradients: shape mismatch");
    GradientComparison cmp;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double an = analytic.values()[i];
        const double err = std::abs(an - fd.values()[i]);
        cmp.max_abs_error = std::max(cmp.max_abs_error, err);
        cmp.max_rel_error = std::max(cmp.max_rel_error, err / std::max(std::abs(an), atol / rtol));
        if (!(err <= rtol * std::abs(an) + atol)) cmp.pass = false;
    }
    return cmp;
}

namespace {

std::vector<ProblemDims> grid(std::size_t max_n) {
    std::vector<ProblemDims> out;
    for (std::size_t k : {1, 3, 5})
        for (std::size_t N = 3; N <= max_n; ++N)
            for (std::size_t g = 1; g <= 3; ++g)
                for (std::size_t h = 1; h <= 3; ++h) out.emplace_back(N, k, g, h);
    return out;
}

KernelTensor signed_uniform_kernel(KernelShape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    KernelTensor kernel(shape);
    for (double& v : kernel.values()) v = uni(rng);
    return kernel;
}

std::string describe(const ProblemDims& d) {
    std::ostringstream os;
    os << d;
    return os.str();
}

CheckResult check_matvec(const VerifyOptions& opt, std::mt19937_64& rng) {
    CheckResult res{"operator-matrix equivalence", true, 0.0, ""};
    for (const auto& dims : grid(opt.grid_max_n)) {
        const KernelTensor kernel = signed_uniform_kernel({dims.k, dims.g, dims.h}, rng);
        MatvecReport rep = matvec_equivalence_report(kernel, dims.N, opt.matvec_trials, rng());
        if (opt.inject_fault) {
            // Explicit matrix of a slightly different kernel against the original operator.
            KernelTensor shifted = kernel;
            shifted.values()[0] += 1e-3;
            const std::vector<double> x(dims.n_in(), 1.0);
            const auto a = apply_operator(kernel, dims.N, x);
            const auto b = build_multi(shifted, dims.N).multiply(x);
            double diff = 0.0, ref = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                diff += (a[i] - b[i]) * (a[i] - b[i]);
                ref += a[i] * a[i];
            }
            rep.max_rel_error = std::max(rep.max_rel_error, std::sqrt(diff / ref));
            rep.pass = rep.max_rel_error <= 1e-12;
        }
        if (rep.max_rel_error > res.worst) {
            res.worst = rep.max_rel_error;
            res.detail = describe(dims);
        }
        res.pass = res.pass && rep.pass;
    }
    return res;
}

CheckResult check_adjoint(const VerifyOptions& opt, std::mt19937_64& rng) {
    CheckResult res{"adjoint identity", true, 0.0, ""};
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (const auto& dims : grid(opt.grid_max_n)) {
        const KernelTensor kernel = signed_uniform_kernel({dims.k, dims.g, dims.h}, rng);
        std::vector<double> v(dims.n_in()), w(dims.n_out());
        for (double& x : v) x = uni(rng);
        for (double& x : w) x = uni(rng);
        const auto mv = apply_operator(kernel, dims.N, v);
        const auto mtw = apply_adjoint(kernel, dims.N, w);
        double lhs = 0.0, rhs = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            lhs += mv[i] * w[i];
            scale += std::abs(mv[i] * w[i]);
        }
        for (std::size_t i = 0; i < v.size(); ++i) rhs += v[i] * mtw[i];
        if (opt.inject_fault) rhs *= 1.0 + 1e-6;
        const double rel = std::abs(lhs - rhs) / std::max(scale, 1e-300);
        if (rel > res.worst) {
            res.worst = rel;
            res.detail = describe(dims);
        }
    }
    res.pass = res.worst <= 1e-12;
    return res;
}

CheckResult check_omega(const VerifyOptions& opt) {
    CheckResult res{"omega exactness", true, 0.0, ""};
    std::size_t mismatches = 0;
    for (const auto& dims : grid(opt.grid_max_n)) {
        std::set<MatrixPosition> covered;
        std::size_t total = 0;
        for (std::size_t y = 1; y <= dims.h; ++y)
            for (std::size_t z = 1; z <= dims.g; ++z)
                for (std::size_t q = 1; q <= dims.k; ++q)
                    for (std::size_t p = 1; p <= dims.k; ++p) {
                        const KernelIndex idx{p, q, z, y};
                        OmegaIndexSet analytic = omega(dims, idx);
                        if (opt.inject_fault && !analytic.positions.empty()) analytic.positions.pop_back();
                        const OmegaIndexSet scanned = omega_scan(dims, idx);
                        const long m = static_cast<long>(dims.m());
                        const long n = static_cast<long>(dims.N);
                        const auto expected_count = static_cast<std::size_t>(
                            (n - std::labs(static_cast<long>(p) - m)) * (n - std::labs(static_cast<long>(q) - m)));
                        const bool ok = analytic.positions == scanned.positions &&
                                        scanned.positions.size() == expected_count;
                        if (!ok) {
                            ++mismatches;
                            if (res.detail.empty())
                                res.detail = describe(dims) + " at (" + std::to_string(p) + "," + std::to_string(q) +
                                             "," + std::to_string(z) + "," + std::to_string(y) + ")";
                        }
                        total += scanned.positions.size();
                        covered.insert(scanned.positions.begin(), scanned.positions.end());
                    }
        // Disjoint sets whose union is the full structural pattern of a dense-valued kernel.
        const StructuredMatrix full = build_multi(KernelTensor({dims.k, dims.g, dims.h},
                                                               std::vector<double>(dims.k * dims.k * dims.g * dims.h, 1.0)),
                                                  dims.N);
        if (covered.size() != total || total != full.nnz()) {
            ++mismatches;
            if (res.detail.empty()) res.detail = describe(dims) + ": union/disjointness";
        }
    }
    res.worst = static_cast<double>(mismatches);
    res.pass = mismatches == 0;
    return res;
}

struct GradientShape {
    std::size_t k, g, h, N;
};

const std::vector<GradientShape>& gradient_shapes() {
    static const std::vector<GradientShape> shapes = {
        {3, 1, 1, 5}, {3, 2, 2, 4}, {3, 1, 2, 4}, {3, 2, 1, 4}, {5, 1, 1, 6},
    };
    return shapes;
}

constexpr double kFdEps = 1e-6;
constexpr double kFdAtol = 1e-9;

enum class GradKind { frob, sigma_min, combined };

CheckResult check_gradient(const VerifyOptions& opt, std::mt19937_64& rng, GradKind kind) {
    const char* names[] = {"frob gradient vs finite differences", "sigma_min gradient vs finite differences",
                           "combined gradient vs finite differences"};
    const double rtol = kind == GradKind::frob ? 1e-7 : 1e-5;
    CheckResult res{names[static_cast<int>(kind)], true, 0.0, ""};
    int skipped = 0;

    for (const auto& s : gradient_shapes()) {
        const ProblemDims dims(s.N, s.k, s.g, s.h);
        for (int t = 0; t < opt.gradient_kernels; ++t) {
            const KernelTensor kernel = signed_uniform_kernel({s.k, s.g, s.h}, rng);
            GradientTensor analytic;
            GradientTensor fd;
            if (kind == GradKind::frob) {
                analytic = frob_gradient(kernel, s.N);
                fd = fd_gradient([&](const KernelTensor& k) { return explicit_frob_penalty(k, s.N); }, kernel, kFdEps);
            } else {
                const ExtremePairs pairs = extreme_singular_pairs(build_multi(kernel, s.N));
                if (simplicity_check(pairs.min, 1e-6, pairs.max.sigma) == Simplicity::degenerate) {
                    ++skipped;
                    continue;
                }
                const double w = combined_weight(dims);
                if (kind == GradKind::sigma_min) {
                    analytic = sigma_min_gradient(kernel, s.N, pairs.min, pairs.max.sigma);
                    fd = fd_gradient([&](const KernelTensor& k) { return explicit_sigma_min(k, s.N); }, kernel, kFdEps);
                } else {
                    analytic = combined_gradient(kernel, s.N, pairs.min, pairs.max.sigma);
                    fd = fd_gradient(
                        [&](const KernelTensor& k) { return explicit_frob_penalty(k, s.N) - static_cast<long double>(w) * explicit_sigma_min(k, s.N); },
                        kernel, kFdEps);
                }
            }
            if (opt.inject_fault) analytic.values()[0] *= 1.0 + 1e-3;
            const GradientComparison cmp = compare_gradients(analytic, fd, rtol, kFdAtol);
            if (cmp.max_rel_error > res.worst) {
                res.worst = cmp.max_rel_error;
                res.detail = describe(dims);
            }
            res.pass = res.pass && cmp.pass;
        }
    }
    if (skipped > 0) res.detail += (res.detail.empty() ? "" : "; ") + std::to_string(skipped) + " degenerate skipped";
    return res;
}

CheckResult check_frobenius_identity(const VerifyOptions& opt, std::mt19937_64& rng) {
    CheckResult res{"frobenius identity (closed form vs singular values)", true, 0.0, ""};
    for (const auto& s : gradient_shapes()) {
        for (int t = 0; t < 10; ++t) {
            const KernelTensor kernel = signed_uniform_kernel({s.k, s.g, s.h}, rng);
            double closed = frob_penalty(kernel, s.N);
            if (opt.inject_fault) closed *= 1.0 + 1e-6;
            const ExtremePairs pairs = extreme_singular_pairs(build_multi(kernel, s.N));
            double sum = 0.0;
            for (double sv : pairs.singular_values) sum += sv * sv;
            const double rel = std::abs(closed - 0.5 * sum) / std::abs(closed);
            if (rel > res.worst) {
                res.worst = rel;
                res.detail = describe(ProblemDims(s.N, s.k, s.g, s.h));
            }
        }
    }
    res.pass = res.worst <= 1e-10;
    return res;
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::vector<CheckResult> results;
    results.push_back(check_matvec(options, rng));
    results.push_back(check_adjoint(options, rng));
    results.push_back(check_omega(options));
    results.push_back(check_gradient(options, rng, GradKind::frob));
    results.push_back(check_gradient(options, rng, GradKind::sigma_min));
    results.push_back(check_gradient(options, rng, GradKind::combined));
    results.push_back(check_frobenius_identity(options, rng));
    return results;
}

void print_report(std::ostream& os, const std::vector<CheckResult>& results) {
    for (const auto& r : results) {
        os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  worst=" << std::setprecision(3) << std::scientific
           << r.worst << std::defaultfloat;
        if (!r.detail.empty()) os << "  (" << r.detail << ")";
        os << '\n';
    }
}

}  // namespace convreg
