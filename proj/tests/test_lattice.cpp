#include "twoscale/cell.hpp"
#include "twoscale/error.hpp"
#include "twoscale/lattice.hpp"

#include <gtest/gtest.h>

using namespace twoscale;

TEST(Lattice, IdentityHasZeroCorrectors) {
    const auto c = lattice_correctors(make_family("identity", {}), 8);
    for (const auto& x : c.chi) EXPECT_LE(x.cwiseAbs().maxCoeff(), 1e-13);
    for (const auto& x : c.upsilon) EXPECT_LE(x.cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE((c.A_hat - Tensor2::Identity()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Lattice, SolvesAreExact) {
    const auto c = lattice_correctors(make_family("trig2d", {1.0}), 8);
    EXPECT_LE(c.chi_residual, 1e-12);
    EXPECT_LE(c.upsilon_residual, 1e-12);
    EXPECT_LE(c.upsilon_rhs_mean, 1e-12);
    EXPECT_NEAR(c.A_hat(0, 1), c.A_hat(1, 0), 1e-13);
}

TEST(Lattice, ApproachesSpectralTensor) {
    const Tensor2 ref = compute_correctors(make_family("trig2d", {1.0}), 64).A_hat;
    const double e16 = (lattice_correctors(make_family("trig2d", {1.0}), 16).A_hat - ref).norm();
    const double e32 = (lattice_correctors(make_family("trig2d", {1.0}), 32).A_hat - ref).norm();
    EXPECT_LT(e32, e16);
    EXPECT_LT(e32, 1e-2);
}

TEST(Lattice, InterpolationHitsNodes) {
    const auto c = lattice_correctors(make_family("trig2d", {1.0}), 8);
    const auto f = c.chi_function(0);
    EXPECT_NEAR(f.value(Vec2(3.0 / 8, 5.0 / 8)), c.chi[0][3 * 8 + 5], 1e-14);
    EXPECT_NEAR(f.value(Vec2(3.0 / 8 + 2.0, 5.0 / 8 - 1.0)), c.chi[0][3 * 8 + 5], 1e-12);
    const Vec2 g = f.gradient(Vec2(0.3 / 8, 0.2 / 8));
    EXPECT_NEAR(g.x(), (c.chi[0][8] - c.chi[0][0]) * 8, 1e-12);
}

TEST(Lattice, RejectsBadInput) {
    EXPECT_THROW(lattice_correctors(make_family("trig1d", {0.0}), 8), ConfigError);
    EXPECT_THROW(lattice_correctors(make_family("identity", {}), 1), ConfigError);
}
