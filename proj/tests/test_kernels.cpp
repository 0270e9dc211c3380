#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "wakeloc/error.hpp"
#include "wakeloc/kernels.hpp"

using namespace wakeloc::kernels;

namespace {

struct TdoaCase {
    std::vector<double> ax, ay, az, off, px, py, pz;
    double rx, ry, rz;
};

TdoaCase make_case(std::mt19937_64& rng, std::size_t n_anchors, std::size_t n_particles) {
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    TdoaCase c;
    for (std::size_t i = 0; i < n_anchors; ++i) {
        c.ax.push_back(u(rng));
        c.ay.push_back(u(rng));
        c.az.push_back(u(rng) * 0.05);
        c.off.push_back(u(rng));
    }
    for (std::size_t k = 0; k < n_particles; ++k) {
        c.px.push_back(u(rng));
        c.py.push_back(u(rng));
        c.pz.push_back(u(rng) * 0.05);
    }
    c.rx = u(rng);
    c.ry = u(rng);
    c.rz = 1.0;
    return c;
}

TdoaCostTerms terms(const TdoaCase& c) {
    return {c.ax, c.ay, c.az, c.off, c.rx, c.ry, c.rz};
}

}  // namespace

TEST(Kernels, ScalarTdoaCostMatchesDefinition) {
    std::mt19937_64 rng(3);
    const auto c = make_case(rng, 5, 7);
    std::vector<double> out(7);
    scalar::tdoa_cost(terms(c), c.px, c.py, c.pz, out);
    for (std::size_t k = 0; k < 7; ++k) {
        const double dref = std::sqrt(std::pow(c.px[k] - c.rx, 2) + std::pow(c.py[k] - c.ry, 2) +
                                      std::pow(c.pz[k] - c.rz, 2));
        double cost = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            const double d = std::sqrt(std::pow(c.px[k] - c.ax[i], 2) + std::pow(c.py[k] - c.ay[i], 2) +
                                       std::pow(c.pz[k] - c.az[i], 2));
            const double r = c.off[i] - d + dref;
            cost += r * r;
        }
        EXPECT_NEAR(out[k], cost, 1e-9 * std::max(1.0, cost));
    }
}

TEST(Kernels, ScalarCountWithin) {
    const std::vector<double> ax{0, 10, 20}, ay{0, 0, 0};
    const std::vector<double> qx{0, 10, 100}, qy{0, 0, 0};
    std::vector<int> out(3);
    scalar::count_within(ax, ay, 10.0, qx, qy, out);
    EXPECT_EQ(out, (std::vector<int>{2, 3, 0}));
}

TEST(Kernels, Avx2TdoaCostMatchesScalar) {
    if (!isa_available(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available";
    std::mt19937_64 rng(11);
    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 13u}) {
        for (std::size_t m : {0u, 1u, 3u, 4u, 5u, 17u, 1000u}) {
            const auto c = make_case(rng, n, m);
            std::vector<double> ref(m), simd(m);
            scalar::tdoa_cost(terms(c), c.px, c.py, c.pz, ref);
            avx2::tdoa_cost(terms(c), c.px, c.py, c.pz, simd);
            for (std::size_t k = 0; k < m; ++k) EXPECT_NEAR(simd[k], ref[k], 1e-9 * std::max(1.0, ref[k]));
        }
    }
}

TEST(Kernels, Avx2CountWithinMatchesScalarExactly) {
    if (!isa_available(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available";
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 150.0);
    for (std::size_t n : {1u, 4u, 7u, 89u}) {
        for (std::size_t m : {0u, 1u, 3u, 5u, 999u}) {
            std::vector<double> ax(n), ay(n), qx(m), qy(m);
            for (auto* v : {&ax, &ay, &qx, &qy}) {
                for (auto& x : *v) x = std::round(u(rng));  // grid points hit the boundary exactly
            }
            std::vector<int> ref(m), simd(m);
            scalar::count_within(ax, ay, 50.0, qx, qy, ref);
            avx2::count_within(ax, ay, 50.0, qx, qy, simd);
            EXPECT_EQ(ref, simd);
        }
    }
}

TEST(Kernels, DispatchAndForce) {
    EXPECT_TRUE(isa_available(Isa::Scalar));
    force_isa(Isa::Scalar);
    EXPECT_EQ(active_isa(), Isa::Scalar);
    if (!isa_available(Isa::Avx2)) {
        EXPECT_THROW(force_isa(Isa::Avx2), wakeloc::Error);
    }
    force_isa(std::nullopt);
    EXPECT_EQ(active_isa(), isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar);
}

TEST(Kernels, DispatchedEntryMatchesScalar) {
    std::mt19937_64 rng(21);
    const auto c = make_case(rng, 6, 257);
    std::vector<double> ref(257), out(257);
    scalar::tdoa_cost(terms(c), c.px, c.py, c.pz, ref);
    tdoa_cost(terms(c), c.px, c.py, c.pz, out);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(out[k], ref[k], 1e-9 * std::max(1.0, ref[k]));
}
