#include <doctest.h>

#include <cmath>

#include "convreg/regularizers.hpp"
#include "convreg/structured_matrix.hpp"
#include "convreg/validation.hpp"
#include "oracles.hpp"

using namespace convreg;

namespace {

/// Smallest of the min(rows, cols) singular values of the brute-force matrix.
long double oracle_sigma_min(const KernelTensor& K, std::size_t N) {
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(oracle::dense_matrix(K, N)).singularValues();
    return s(s.size() - 1);
}

long double oracle_frob(const KernelTensor& K, std::size_t N) {
    long double sum = 0.0L;
    const Eigen::MatrixXd M = oracle::dense_matrix(K, N);
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        for (Eigen::Index i = 0; i < M.rows(); ++i) sum += static_cast<long double>(M(i, j)) * M(i, j);
    return 0.5L * sum;
}

/// Worst |fd - an| / (|an| + atol / rtol) over all entries.
bool fd_agrees(const GradientTensor& an, const GradientTensor& fd, double rtol, double atol) {
    bool ok = true;
    for (std::size_t i = 0; i < an.size(); ++i) {
        const double a = an.values()[i];
        const double f = fd.values()[i];
        if (!(std::abs(f - a) <= rtol * std::abs(a) + atol)) {
            MESSAGE("entry " << i << ": analytic " << a << " fd " << f);
            ok = false;
        }
    }
    return ok;
}

/// First seed in [seed, seed + 100) whose kernel has a sigma_min gap of at least 1e-3.
KernelTensor simple_kernel(KernelShape shape, std::size_t N, std::uint64_t seed) {
    for (std::uint64_t s = seed; s < seed + 100; ++s) {
        KernelTensor K = oracle::random_kernel(shape, s);
        if (extreme_singular_pairs(build_multi(K, N)).min.gap >= 1e-3) return K;
    }
    FAIL("no kernel with a simple sigma_min found");
    return KernelTensor(shape);
}

}  // namespace

TEST_CASE("penalty kinds parse and print") {
    for (PenaltyKind kind : {PenaltyKind::Frobenius, PenaltyKind::NegSigmaMin, PenaltyKind::Combined})
        CHECK(parse_penalty_kind(to_string(kind)) == kind);
    CHECK_FALSE(parse_penalty_kind("orth").has_value());
    CHECK(combined_weight(ProblemDims(20, 3, 1, 1)) == 400.0);
    CHECK(combined_weight(ProblemDims(20, 3, 3, 1)) == 400.0);
    CHECK(combined_weight(ProblemDims(5, 3, 2, 3)) == 50.0);
}

TEST_CASE("frobenius penalty closed form") {
    CHECK(frob_penalty(KernelTensor(KernelShape{3, 1, 1}), 20) == 0.0);
    CHECK(frob_penalty(identity_center(KernelShape{3, 1, 1}), 20) == 200.0);
    for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 3}, KernelShape{5, 2, 1}}) {
        const KernelTensor K = oracle::random_kernel(shape, shape.k + shape.g + shape.h);
        const double closed = frob_penalty(K, 6);
        CHECK(std::abs(closed - 0.5 * frobenius_norm_sq(build_multi(K, 6))) <= 1e-12 * closed);
        CHECK(penalty_value(K, 6, PenaltyKind::Frobenius) == closed);
    }
}

TEST_CASE("frobenius gradient is the omega count times the kernel") {
    const KernelTensor K = oracle::random_kernel(KernelShape{3, 1, 1}, 4);
    const GradientTensor G = frob_gradient(K, 20);
    CHECK(G(2, 2) == 400.0 * K(2, 2));
    CHECK(G(1, 1) == 361.0 * K(1, 1));
    CHECK(G(1, 2) == 380.0 * K(1, 2));
    CHECK(G(3, 1) == 361.0 * K(3, 1));
    const GradientTensor zero = frob_gradient(KernelTensor(KernelShape{3, 2, 2}), 5);
    for (double v : zero.values()) CHECK(v == 0.0);

    const GradientTensor fd = fd_gradient([](const KernelTensor& k) { return oracle_frob(k, 20); }, K, 1e-6);
    CHECK(fd_agrees(G, fd, 1e-7, 1e-9));

    const KernelTensor K2 = oracle::random_kernel(KernelShape{3, 2, 2}, 5);
    const GradientTensor fd2 = fd_gradient([](const KernelTensor& k) { return oracle_frob(k, 6); }, K2, 1e-6);
    CHECK(fd_agrees(frob_gradient(K2, 6), fd2, 1e-6, 1e-9));
}

TEST_CASE("sigma_min gradient is refused at a degenerate spectrum") {
    const KernelTensor I = identity_center(KernelShape{3, 1, 1});
    const ExtremePairs p = extreme_singular_pairs(build_multi(I, 20));
    CHECK_THROWS_AS(sigma_min_gradient(I, 20, p.min, p.max.sigma), DegenerateSpectrum);
    CHECK_THROWS_AS(combined_gradient(I, 20, p.min, p.max.sigma), DegenerateSpectrum);
    CHECK_THROWS_AS(penalty_gradient(I, 20, PenaltyKind::NegSigmaMin, p), DegenerateSpectrum);
    CHECK_NOTHROW(penalty_gradient(I, 20, PenaltyKind::Frobenius, p));
}

TEST_CASE("sigma_min gradient matches finite differences") {
    for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 1}, KernelShape{3, 1, 2}}) {
        const std::size_t N = 5;
        const KernelTensor K = simple_kernel(shape, N, 200 + shape.g + 2 * shape.h);
        const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
        const GradientTensor an = sigma_min_gradient(K, N, p.min, p.max.sigma);
        const GradientTensor fd = fd_gradient([&](const KernelTensor& k) { return oracle_sigma_min(k, N); }, K, 1e-6);
        CHECK(fd_agrees(an, fd, 1e-5, 1e-9));
        for (std::size_t i = 0; i < an.size(); ++i) {
            const GradientTensor neg = penalty_gradient(K, N, PenaltyKind::NegSigmaMin, p);
            CHECK(neg.values()[i] == -an.values()[i]);
        }
    }
}

TEST_CASE("sigma_min gradient is invariant under kernel scaling") {
    const std::size_t N = 5;
    const KernelTensor K = simple_kernel(KernelShape{3, 1, 1}, N, 300);
    KernelTensor K2 = K;
    for (double& v : K2.values()) v *= 2.0;
    const ExtremePairs p1 = extreme_singular_pairs(build_multi(K, N));
    const ExtremePairs p2 = extreme_singular_pairs(build_multi(K2, N));
    const GradientTensor g1 = sigma_min_gradient(K, N, p1.min, p1.max.sigma);
    const GradientTensor g2 = sigma_min_gradient(K2, N, p2.min, p2.max.sigma);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1.values()[i] - g2.values()[i]) <= 1e-8);
}

TEST_CASE("sigma_min gradient entries are bounded by one") {
    for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 3}, KernelShape{5, 2, 2}}) {
        const std::size_t N = 6;
        const KernelTensor K = simple_kernel(shape, N, 400 + shape.k);
        const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
        const GradientTensor G = sigma_min_gradient(K, N, p.min, p.max.sigma);
        for (double v : G.values()) CHECK(std::abs(v) <= 1.0 + 1e-12);
        CHECK(flat_norm(G) <= static_cast<double>(shape.k * shape.k * std::max(shape.g, shape.h)));
    }
}

TEST_CASE("combined gradient") {
    const std::size_t N = 5;
    SUBCASE("single channel uses weight N^2") {
        const KernelTensor K = simple_kernel(KernelShape{3, 1, 1}, N, 500);
        const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
        const GradientTensor c = combined_gradient(K, N, p.min, p.max.sigma);
        const GradientTensor f = frob_gradient(K, N);
        const GradientTensor s = sigma_min_gradient(K, N, p.min, p.max.sigma);
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK(c.values()[i] == doctest::Approx(f.values()[i] - 25.0 * s.values()[i]).epsilon(1e-14));
        CHECK(penalty_value(K, N, PenaltyKind::Combined, p) ==
              doctest::Approx(frob_penalty(K, N) - 25.0 * p.min.sigma).epsilon(1e-15));
    }
    SUBCASE("matches finite differences of the combined penalty") {
        for (KernelShape shape : {KernelShape{3, 1, 1}, KernelShape{3, 2, 1}, KernelShape{3, 2, 2}}) {
            const KernelTensor K = simple_kernel(shape, N, 600 + shape.g + shape.h);
            const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
            const long double weight = std::min(shape.g, shape.h) * N * N;
            const GradientTensor fd = fd_gradient(
                [&](const KernelTensor& k) { return oracle_frob(k, N) - weight * oracle_sigma_min(k, N); }, K, 1e-6);
            CHECK(fd_agrees(combined_gradient(K, N, p.min, p.max.sigma), fd, 1e-5, 1e-9));
        }
    }
}

TEST_CASE("combined gradient vanishes where the two terms cancel") {
    // k = 1, g = 2, h = 1, N = 1: M = [a b], so the combined penalty is
    // (a^2 + b^2)/2 - sqrt(a^2 + b^2). Find the root along t * K0 by bisection.
    const std::size_t N = 1;
    const KernelTensor K0(KernelShape{1, 2, 1}, {0.6, 1.7});
    auto directional = [&](double t) {
        KernelTensor K = K0;
        for (double& v : K.values()) v *= t;
        const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
        const GradientTensor G = combined_gradient(K, N, p.min, p.max.sigma);
        return G.values()[0] * K0.values()[0] + G.values()[1] * K0.values()[1];
    };
    double lo = 0.1;
    double hi = 10.0;
    REQUIRE(directional(lo) < 0.0);
    REQUIRE(directional(hi) > 0.0);
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (directional(mid) < 0.0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    KernelTensor K = K0;
    for (double& v : K.values()) v *= t;
    CHECK(flat_norm(K) == doctest::Approx(1.0).epsilon(1e-12));
    const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
    const GradientTensor G = combined_gradient(K, N, p.min, p.max.sigma);
    for (double v : G.values()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("penalty values at the identity-center kernel") {
    const KernelTensor I = identity_center(KernelShape{3, 1, 1});
    CHECK(penalty_value(I, 20, PenaltyKind::Frobenius) == 200.0);
    CHECK(penalty_value(I, 20, PenaltyKind::NegSigmaMin) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(penalty_value(I, 20, PenaltyKind::Combined) == doctest::Approx(-200.0).epsilon(1e-14));
}

TEST_CASE("small steps move each penalty in the right direction") {
    const std::size_t N = 5;
    const KernelTensor K = simple_kernel(KernelShape{3, 1, 1}, N, 700);
    const double lr = 1e-4;

    const KernelTensor Kf = descend(K, frob_gradient(K, N), lr);
    CHECK(frob_penalty(Kf, N) < frob_penalty(K, N));

    const ExtremePairs p = extreme_singular_pairs(build_multi(K, N));
    const GradientTensor G = penalty_gradient(K, N, PenaltyKind::NegSigmaMin, p);
    const KernelTensor Ks = descend(K, G, lr);
    const double after = extreme_singular_pairs(build_multi(Ks, N)).min.sigma;
    const double gnorm = flat_norm(G);
    // First-order gain is lr |G|^2; allow an O(lr^2) second-order loss.
    CHECK(after - p.min.sigma >= lr * gnorm * gnorm - 100.0 * lr * lr * gnorm * gnorm);
}
