#include "convreg/spectral.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "convreg/conv.hpp"

namespace convreg {

namespace {

constexpr std::uint64_t kStartVectorSeed = 0x5eed5eedULL;

Eigen::VectorXd start_vector(Eigen::Index n) {
    std::mt19937_64 rng(kStartVectorSeed);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    return x.normalized();
}

// Fix the sign so the largest |v(j)| is positive; u(i) v(j) products are unaffected.
void normalize_sign(SpectralPair& pair) {
    if (pair.v.size() == 0) return;
    Eigen::Index j = 0;
    pair.v.cwiseAbs().maxCoeff(&j);
    if (pair.v(j) < 0) {
        pair.v = -pair.v;
        pair.u = -pair.u;
    }
}

std::span<const double> as_span(const Eigen::VectorXd& x) {
    return {x.data(), static_cast<std::size_t>(x.size())};
}

Eigen::VectorXd as_vector(const std::vector<double>& x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

Eigen::VectorXd unit(Eigen::Index n) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    if (n > 0) e(0) = 1.0;
    return e;
}

// Gap from the asymptotic residual contraction factor of a power-type iteration.
// `ratio` is (sigma_other / sigma)^(+-2); returns 0 when no rate was observed.
double gap_from_ratio(double sigma, double ratio, bool inverse) {
    if (!(ratio > 0.0) || ratio >= 1.0) return 0.0;
    const double s = std::sqrt(ratio);
    return inverse ? sigma * (1.0 / s - 1.0) : sigma * (1.0 - s);
}

}  // namespace

double pair_residual(const StructuredMatrix& M, double sigma, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const Eigen::VectorXd mv = as_vector(M.multiply(as_span(v)));
    const Eigen::VectorXd mtu = as_vector(M.multiply_transpose(as_span(u)));
    return std::max((mv - sigma * u).norm(), (mtu - sigma * v).norm());
}

namespace {

// Thin SVD pieces of a dense matrix: singular values plus left/right vectors
// for the requested columns only.
struct PartialSvd {
    Eigen::VectorXd values;
    std::vector<Eigen::VectorXd> left;
    std::vector<Eigen::VectorXd> right;
};

// For a tall A (rows > cols), A = Q R and the SVD of the square R gives the
// singular values and right vectors directly; left vectors are Q applied to
// the padded left vectors of R, formed only for the requested columns.
PartialSvd partial_svd(const Eigen::MatrixXd& A, std::initializer_list<Eigen::Index> wanted) {
    PartialSvd out;
    if (A.rows() == A.cols()) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw SvdFailure("dense SVD did not converge");
        out.values = svd.singularValues();
        for (Eigen::Index idx : wanted) {
            out.left.push_back(svd.matrixU().col(idx));
            out.right.push_back(svd.matrixV().col(idx));
        }
        return out;
    }
    const Eigen::Index n = A.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw SvdFailure("dense SVD did not converge");
    out.values = svd.singularValues();
    for (Eigen::Index idx : wanted) {
        Eigen::VectorXd padded = Eigen::VectorXd::Zero(A.rows());
        padded.head(n) = svd.matrixU().col(idx);
        out.left.push_back(qr.householderQ() * padded);
        out.right.push_back(svd.matrixV().col(idx));
    }
    return out;
}

}  // namespace

ExtremePairs extreme_singular_pairs(const StructuredMatrix& M, double certify_tol) {
    if (M.rows() == 0 || M.cols() == 0) throw SpectralError("extreme_singular_pairs: empty matrix");

    const bool wide = M.rows() < M.cols();
    const Eigen::Index r = static_cast<Eigen::Index>(std::min(M.rows(), M.cols()));
    // Work on the tall orientation; for a wide M the roles of u and v swap.
    const Eigen::MatrixXd dense = wide ? Eigen::MatrixXd(M.to_dense().transpose()) : M.to_dense();
    const PartialSvd svd = partial_svd(dense, {0, r - 1});
    const Eigen::VectorXd& s = svd.values;
    const double inf = std::numeric_limits<double>::infinity();

    ExtremePairs out;
    out.singular_values.assign(s.data(), s.data() + r);

    auto make_pair = [&](std::size_t slot, Eigen::Index idx, double gap) {
        SpectralPair pair;
        pair.sigma = std::max(0.0, s(idx));
        pair.u = wide ? svd.right[slot] : svd.left[slot];
        pair.v = wide ? svd.left[slot] : svd.right[slot];
        pair.gap = gap;
        normalize_sign(pair);
        pair.residual = pair_residual(M, pair.sigma, pair.u, pair.v);
        return pair;
    };

    out.max = make_pair(0, 0, r > 1 ? s(0) - s(1) : inf);
    out.min = make_pair(1, r - 1, r > 1 ? s(r - 2) - s(r - 1) : inf);

    const double bound = certify_tol * out.max.sigma;
    for (const SpectralPair* p : {&out.max, &out.min}) {
        if (!(p->residual <= bound))
            throw SvdFailure("dense SVD pair failed certification: residual " + std::to_string(p->residual) +
                             " > " + std::to_string(bound));
    }
    return out;
}

SpectralPair sigma_max_iterative(const KernelTensor& kernel, std::size_t N, double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("sigma_max_iterative: tol must be positive");
    const auto n_in = static_cast<Eigen::Index>(kernel.g() * N * N);
    const auto n_out = static_cast<Eigen::Index>(kernel.h() * N * N);

    Eigen::VectorXd v = start_vector(n_in);
    double prev_residual = 0.0;
    double ratio = 0.0;

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd w = as_vector(apply_operator(kernel, N, as_span(v)));
        const double sigma = w.norm();
        SpectralPair pair;
        if (sigma == 0.0) {
            // v is in the null space; with a zero operator every unit u works.
            pair.sigma = 0.0;
            pair.v = v;
            pair.u = unit(n_out);
            pair.residual = as_vector(apply_adjoint(kernel, N, as_span(pair.u))).norm();
            if (pair.residual == 0.0) {
                normalize_sign(pair);
                return pair;
            }
            throw NotConverged("sigma_max_iterative: start vector in null space");
        }
        const Eigen::VectorXd u = w / sigma;
        const Eigen::VectorXd z = as_vector(apply_adjoint(kernel, N, as_span(u)));
        const double residual = (z - sigma * v).norm();

        if (prev_residual > 0.0 && residual > 0.0) ratio = residual / prev_residual;
        prev_residual = residual;

        if (residual <= tol * sigma) {
            pair.sigma = sigma;
            pair.u = u;
            pair.v = v;
            pair.residual = residual;
            pair.gap = gap_from_ratio(sigma, ratio, false);
            normalize_sign(pair);
            return pair;
        }
        v = z.normalized();
    }
    throw NotConverged("sigma_max_iterative: no convergence in " + std::to_string(max_iter) + " iterations");
}

SpectralPair sigma_min_iterative(const KernelTensor& kernel, std::size_t N, double scale, double tol,
                                 int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("sigma_min_iterative: tol must be positive");
    const StructuredMatrix M = build_multi(kernel, N);
    const Eigen::SparseMatrix<double> S = M.to_sparse();
    const bool tall = M.rows() >= M.cols();

    // Work on the Gram matrix of the smaller side; its smallest eigenvalue is sigma_min^2.
    const Eigen::SparseMatrix<double> gram = tall ? Eigen::SparseMatrix<double>(S.transpose() * S)
                                                  : Eigen::SparseMatrix<double>(S * S.transpose());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw SpectralError("sigma_min_iterative: Gram matrix factorization failed (singular operator)");

    Eigen::VectorXd x = start_vector(gram.rows());
    double prev_residual = 0.0;
    double ratio = 0.0;

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd y = ldlt.solve(x);
        if (!y.allFinite() || y.norm() == 0.0)
            throw SpectralError("sigma_min_iterative: Gram matrix is numerically singular");
        x = y.normalized();

        const Eigen::VectorXd w = tall ? Eigen::VectorXd(S * x) : Eigen::VectorXd(S.transpose() * x);
        const double sigma = w.norm();
        if (sigma == 0.0) throw SpectralError("sigma_min_iterative: zero singular value");
        const Eigen::VectorXd other = w / sigma;
        const Eigen::VectorXd back = tall ? Eigen::VectorXd(S.transpose() * other) : Eigen::VectorXd(S * other);
        const double residual = (back - sigma * x).norm();

        if (prev_residual > 0.0 && residual > 0.0) ratio = residual / prev_residual;
        prev_residual = residual;

        if (residual <= tol * scale) {
            SpectralPair pair;
            pair.sigma = sigma;
            pair.v = tall ? x : other;
            pair.u = tall ? other : x;
            pair.residual = residual;
            pair.gap = gap_from_ratio(sigma, ratio, true);
            normalize_sign(pair);
            return pair;
        }
    }
    throw NotConverged("sigma_min_iterative: no convergence in " + std::to_string(max_iter) + " iterations");
}

ExtremePairs extreme_singular_pairs_iterative(const KernelTensor& kernel, std::size_t N, double certify_tol) {
    ExtremePairs out;
    out.max = sigma_max_iterative(kernel, N, certify_tol);
    try {
        out.min = sigma_min_iterative(kernel, N, out.max.sigma, certify_tol);
    } catch (const NotConverged&) {
        throw;
    } catch (const SpectralError&) {
        // Singular Gram matrix: sigma_min is zero and no vectors are reported.
        out.min = SpectralPair{};
    }
    return out;
}

Simplicity simplicity_check(const SpectralPair& pair, double threshold, double sigma_max) {
    if (!(pair.gap >= threshold * std::max(sigma_max, 1.0))) return Simplicity::degenerate;
    if (pair.sigma < threshold) return Simplicity::degenerate;
    return Simplicity::simple;
}

}  // namespace convreg
