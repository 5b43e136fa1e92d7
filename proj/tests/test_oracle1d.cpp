#include "twoscale/oracle1d.hpp"
#include "twoscale/rate_fit.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace twoscale;

TEST(Oracle1D, IdentityEigenvaluesExact) {
    const auto c = make_oracle_case(make_family("identity", {}, 1), 2);
    const auto r = eigen_exact_eps(c, 4, 2, 1e-12);
    EXPECT_NEAR(r.lambda, 4.0 * M_PI * M_PI, 1e-8);
}

TEST(Oracle1D, Trig1dHomogenizedData) {
    const auto c = make_oracle_case(make_family("trig1d", {M_PI / 3.0}), 1);
    EXPECT_NEAR(c.a_hat, 0.5, 1e-14);
    EXPECT_NEAR(c.lambda0(), 0.5 * M_PI * M_PI, 1e-12);
    EXPECT_NEAR(c.chi0(), std::sin(M_PI / 3.0) / (4.0 * M_PI), 1e-15);
}

TEST(Oracle1D, EigenvalueConvergesQuadratically) {
    const auto c = make_oracle_case(make_family("trig1d", {M_PI / 3.0}), 1);
    const auto rows = expansion_residuals_1d(c, {8, 16, 32, 64});
    std::vector<double> e, r0;
    for (const auto& r : rows) {
        e.push_back(r.eps);
        r0.push_back(r.r0);
    }
    EXPECT_GT(rate_fit(e, r0).slope, 1.8);
}

TEST(Oracle1D, FirstOrderTermsImproveRates) {
    const auto c = make_oracle_case(make_family("trig1d", {M_PI / 3.0}), 1);
    const auto rows = expansion_residuals_1d(c, {8, 16, 32, 64});
    std::vector<double> e, e1, e2;
    for (const auto& r : rows) {
        e.push_back(r.eps);
        e1.push_back(r.e1);
        e2.push_back(r.e2);
    }
    const double s1 = rate_fit(e, e1).slope, s2 = rate_fit(e, e2).slope;
    EXPECT_GT(s1, 0.9);
    EXPECT_GT(s2, s1 + 0.4);
}

TEST(Oracle1D, KblIsLinearInterpolantOfBoundaryData) {
    const auto c = make_oracle_case(make_family("trig1d", {M_PI / 3.0}), 1);
    const double k0 = -c.chi0() * c.dphi0(0.0), k1 = -c.chi0() * c.dphi0(1.0);
    EXPECT_NEAR(kbl_phi0_exact(c, 0.0), k0, 1e-15);
    EXPECT_NEAR(kbl_phi0_exact(c, 1.0), k1, 1e-15);
    EXPECT_NEAR(kbl_phi0_exact(c, 0.25), 0.75 * k0 + 0.25 * k1, 1e-15);
}

TEST(Oracle1D, PsiBlSatisfiesBoundaryValuesAndOrthogonality) {
    const auto c = make_oracle_case(make_family("trig1d", {M_PI / 3.0}), 1);
    const auto p = psi_bl_exact(c);
    EXPECT_NEAR(p.value(0.0), kbl_phi0_exact(c, 0.0), 1e-14);
    EXPECT_NEAR(p.value(1.0), kbl_phi0_exact(c, 1.0), 1e-14);
    // ∫ ψ φ0 = 0 by midpoint rule.
    double s = 0.0;
    const int q = 20000;
    for (int i = 0; i < q; ++i) {
        const double x = (i + 0.5) / q;
        s += p.value(x) * c.phi0(x) / q;
    }
    EXPECT_NEAR(s, 0.0, 1e-9);
}

TEST(Oracle1D, IdentityResidualsVanish) {
    const auto c = make_oracle_case(make_family("identity", {}, 1), 1);
    for (const auto& r : expansion_residuals_1d(c, {4, 8})) {
        EXPECT_LE(r.r0, 1e-9);
        EXPECT_LE(r.e0, 1e-6);  // shooting tolerance
    }
}
