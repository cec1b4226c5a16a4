#include <doctest.h>

#include <cmath>
#include <limits>

#include "convreg/spectral.hpp"
#include "convreg/structured_matrix.hpp"
#include "oracles.hpp"

using namespace convreg;

namespace {

Eigen::VectorXd oracle_singular_values(const KernelTensor& K, std::size_t N) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(oracle::dense_matrix(K, N)).singularValues();
}

void check_pair(const StructuredMatrix& M, const SpectralPair& pair, double sigma_max) {
    CHECK(std::abs(pair.u.norm() - 1.0) <= 1e-12);
    CHECK(std::abs(pair.v.norm() - 1.0) <= 1e-12);
    CHECK(pair.sigma >= 0.0);
    // The recomputation sums in a different order than the library, so allow rounding.
    const double rounding = 1e-13 * std::max(sigma_max, 1.0);
    const Eigen::MatrixXd D = M.to_dense();
    CHECK((D * pair.v - pair.sigma * pair.u).norm() <= pair.residual + rounding);
    CHECK((D.transpose() * pair.u - pair.sigma * pair.v).norm() <= pair.residual + rounding);
    CHECK(pair.residual <= 1e-8 * sigma_max);
}

}  // namespace

TEST_CASE("identity-center kernel: all singular values are one and the pair is flagged") {
    const ExtremePairs p = extreme_singular_pairs(build_multi(identity_center(KernelShape{3, 1, 1}), 20));
    CHECK(p.max.sigma == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.min.sigma == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.min.gap <= 1e-12);
    CHECK(simplicity_check(p.min, kDefaultGapThreshold, p.max.sigma) == Simplicity::degenerate);
}

TEST_CASE("zero kernel is degenerate") {
    const ExtremePairs p = extreme_singular_pairs(build_multi(KernelTensor(KernelShape{3, 1, 1}), 4));
    CHECK(p.max.sigma == 0.0);
    CHECK(p.min.sigma == 0.0);
    CHECK(simplicity_check(p.min, kDefaultGapThreshold, p.max.sigma) == Simplicity::degenerate);
}

TEST_CASE("dense path matches an independent SVD of the exported matrix") {
    for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 1}, KernelShape{3, 1, 2}, KernelShape{5, 2, 2}}) {
        const std::size_t N = 5;
        const KernelTensor K = oracle::random_kernel(shape, 31 + shape.g + 3 * shape.h);
        const StructuredMatrix M = build_multi(K, N);
        const ExtremePairs p = extreme_singular_pairs(M);
        const Eigen::VectorXd s = oracle_singular_values(K, N);
        CHECK(std::abs(p.max.sigma - s(0)) <= 1e-10 * s(0));
        CHECK(std::abs(p.min.sigma - s(s.size() - 1)) <= 1e-10 * s(0));
        REQUIRE(p.singular_values.size() == static_cast<std::size_t>(s.size()));
        for (Eigen::Index i = 0; i < s.size(); ++i)
            CHECK(std::abs(p.singular_values[static_cast<std::size_t>(i)] - s(i)) <= 1e-10 * s(0));
        CHECK(p.max.gap == doctest::Approx(s(0) - s(1)).epsilon(1e-8));
        CHECK(p.min.gap == doctest::Approx(s(s.size() - 2) - s(s.size() - 1)).epsilon(1e-6));
        check_pair(M, p.max, p.max.sigma);
        check_pair(M, p.min, p.max.sigma);
    }
}

TEST_CASE("tall and wide matrices at experiment scale") {
    for (KernelShape shape : {KernelShape{3, 1, 3}, KernelShape{3, 3, 1}}) {
        const KernelTensor K = oracle::random_kernel(shape, 5, 0.0, 1.0);
        const StructuredMatrix M = build_multi(K, 20);
        const ExtremePairs p = extreme_singular_pairs(M);
        CHECK(p.singular_values.size() == 400);
        CHECK(static_cast<std::size_t>(p.min.u.size()) == M.rows());
        CHECK(static_cast<std::size_t>(p.min.v.size()) == M.cols());
        CHECK(p.max.residual <= 1e-8 * p.max.sigma);
        CHECK(p.min.residual <= 1e-8 * p.max.sigma);
        CHECK(p.min.sigma <= p.max.sigma);
    }
}

TEST_CASE("sum of squared singular values equals the Frobenius norm") {
    const KernelTensor K = oracle::random_kernel(KernelShape{3, 2, 3}, 8);
    const StructuredMatrix M = build_multi(K, 6);
    const ExtremePairs p = extreme_singular_pairs(M);
    double sum = 0.0;
    for (double s : p.singular_values) sum += s * s;
    CHECK(std::abs(sum - frobenius_norm_sq(M)) <= 1e-10 * sum);
}

TEST_CASE("simplicity check thresholds") {
    SpectralPair pair;
    pair.sigma = 0.5;
    pair.gap = 0.3;
    CHECK(simplicity_check(pair, 1e-8, 2.0) == Simplicity::simple);
    pair.gap = 1.5e-8;
    CHECK(simplicity_check(pair, 1e-8, 2.0) == Simplicity::degenerate);
    CHECK(simplicity_check(pair, 1e-8, 1.0) == Simplicity::simple);
    pair.gap = 0.3;
    pair.sigma = 1e-9;
    CHECK(simplicity_check(pair, 1e-8, 2.0) == Simplicity::degenerate);
    pair.sigma = 0.5;
    pair.gap = std::numeric_limits<double>::quiet_NaN();
    CHECK(simplicity_check(pair, 1e-8, 2.0) == Simplicity::degenerate);
}

TEST_CASE("random kernel with a wide gap is simple") {
    // Search a few seeds for a kernel whose dense-spectrum gap is at least 0.3.
    bool found = false;
    for (std::uint64_t seed = 1; seed < 200 && !found; ++seed) {
        const KernelTensor K = oracle::random_kernel(KernelShape{3, 1, 1}, seed);
        const Eigen::VectorXd s = oracle_singular_values(K, 3);
        const double gap = s(s.size() - 2) - s(s.size() - 1);
        if (gap < 0.3) continue;
        found = true;
        const ExtremePairs p = extreme_singular_pairs(build_multi(K, 3));
        CHECK(p.min.gap == doctest::Approx(gap).epsilon(1e-8));
        CHECK(simplicity_check(p.min, 1e-8, p.max.sigma) == Simplicity::simple);
    }
    CHECK(found);
}

TEST_CASE("iterative sigma_max agrees with the dense path") {
    std::uint64_t seed = 60;
    for (std::size_t N : {3, 5, 8})
        for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 3}, KernelShape{5, 3, 1}}) {
            const KernelTensor K = oracle::random_kernel(shape, ++seed);
            const ExtremePairs dense = extreme_singular_pairs(build_multi(K, N));
            const SpectralPair it = sigma_max_iterative(K, N);
            CHECK(std::abs(it.sigma - dense.max.sigma) <= 1e-6 * dense.max.sigma);
            CHECK(it.residual <= 1e-8 * it.sigma);
            CHECK(pair_residual(build_multi(K, N), it.sigma, it.u, it.v) <= 1e-8 * it.sigma);
        }
}

TEST_CASE("iterative sigma_max on identity and rank-deficient kernels") {
    const SpectralPair id = sigma_max_iterative(identity_center(KernelShape{3, 1, 1}), 6);
    CHECK(id.sigma == doctest::Approx(1.0).epsilon(1e-12));

    // h > g with duplicated output slices: M has repeated block rows.
    KernelTensor K(KernelShape{3, 1, 3});
    const KernelTensor slice = oracle::random_kernel(KernelShape{3, 1, 1}, 77);
    for (std::size_t y = 1; y <= 3; ++y)
        for (std::size_t q = 1; q <= 3; ++q)
            for (std::size_t p = 1; p <= 3; ++p) K(p, q, 1, y) = slice(p, q);
    const SpectralPair it = sigma_max_iterative(K, 6);
    const ExtremePairs dense = extreme_singular_pairs(build_multi(K, 6));
    CHECK(std::abs(it.sigma - dense.max.sigma) <= 1e-6 * dense.max.sigma);
    CHECK(it.residual <= 1e-8 * it.sigma);
}

TEST_CASE("iterative sigma_min agrees with the dense path") {
    std::uint64_t seed = 90;
    for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 1, 3}, KernelShape{3, 3, 1}, KernelShape{3, 2, 2}}) {
        const KernelTensor K = oracle::random_kernel(shape, ++seed);
        const std::size_t N = 6;
        const ExtremePairs dense = extreme_singular_pairs(build_multi(K, N));
        const ExtremePairs it = extreme_singular_pairs_iterative(K, N);
        CHECK(std::abs(it.min.sigma - dense.min.sigma) <= 1e-6 * dense.max.sigma);
        CHECK(std::abs(it.max.sigma - dense.max.sigma) <= 1e-6 * dense.max.sigma);
        CHECK(it.singular_values.empty());
        CHECK(pair_residual(build_multi(K, N), it.min.sigma, it.min.u, it.min.v) <= 1e-8 * dense.max.sigma);
    }
}

TEST_CASE("iterative path reports a singular matrix as a degenerate zero pair") {
    const ExtremePairs it = extreme_singular_pairs_iterative(KernelTensor(KernelShape{3, 1, 1}), 4);
    CHECK(it.min.sigma == 0.0);
    CHECK(simplicity_check(it.min, kDefaultGapThreshold, it.max.sigma) == Simplicity::degenerate);
}

TEST_CASE("sign flip of the singular vectors leaves the outer products unchanged") {
    const KernelTensor K = oracle::random_kernel(KernelShape{3, 1, 1}, 3);
    const ExtremePairs p = extreme_singular_pairs(build_multi(K, 4));
    const Eigen::MatrixXd a = p.min.u * p.min.v.transpose();
    const Eigen::MatrixXd b = (-p.min.u) * (-p.min.v).transpose();
    CHECK(a == b);
    CHECK(pair_residual(build_multi(K, 4), p.min.sigma, -p.min.u, -p.min.v) ==
          doctest::Approx(p.min.residual).epsilon(1e-6).scale(1e-12));
}
