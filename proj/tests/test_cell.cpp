#include "dense_oracle.hpp"
#include "twoscale/cell.hpp"
#include "twoscale/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace twoscale;

namespace {

void expect_matches_dense(const CoefficientField& field) {
    const int n = 8;
    const CorrectorSet s = compute_correctors(field, n, 1e-14);
    const auto d = dense_oracle::solve_dense_2d(field, n);
    for (int j = 0; j < 2; ++j) EXPECT_LE(dense_oracle::relative_gap(s.chi[j], d.chi[j]), 1e-10) << "chi " << j;
    for (int k = 0; k < 4; ++k)
        EXPECT_LE(dense_oracle::relative_gap(s.upsilon[k], d.upsilon[k]), 1e-10) << "upsilon " << k;
    for (int k = 0; k < 8; ++k) {
        if (d.b[k].norm() == 0.0) {
            EXPECT_LE(s.b[k].norm(), 1e-14);
        } else {
            EXPECT_LE(dense_oracle::relative_gap(s.b[k], d.b[k]), 1e-10) << "b " << k;
        }
    }
    EXPECT_LE((s.A_hat - d.a_hat).cwiseAbs().maxCoeff(), 1e-10 * d.a_hat.norm());
}

}  // namespace

TEST(Cell, MatchesDenseSolveTrig2d) { expect_matches_dense(make_family("trig2d", {1.0})); }

TEST(Cell, MatchesDenseSolveAniso2d) { expect_matches_dense(make_family("aniso2d", {0.5, 0.7, 0.3})); }

TEST(Cell, Trig1dClosedForm) {
    const CorrectorSet s = compute_correctors(make_family("trig1d", {0.0}), 256);
    double worst = 0.0;
    for (int i = 0; i < 256; ++i) worst = std::max(worst, std::abs(s.chi[0][i] - std::sin(2.0 * M_PI * i / 256.0) / (4.0 * M_PI)));
    EXPECT_LE(worst, 1e-8);
    EXPECT_NEAR(s.A_hat(0, 0), 0.5, 1e-10);
}

TEST(Cell, IdentityHasZeroCorrectors) {
    const CorrectorSet s = compute_correctors(make_family("identity", {}), 16);
    for (const auto& c : s.chi) EXPECT_LE(c.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(s.A_hat.isApprox(Tensor2::Identity(), 1e-14));
}

TEST(Cell, Trig2dSymmetricWithinVoigtReuss) {
    const CorrectorSet s = compute_correctors(make_family("trig2d", {1.0}), 64);
    EXPECT_LE(std::abs(s.A_hat(0, 1) - s.A_hat(1, 0)), 1e-12);
    EXPECT_NEAR(s.A_hat(0, 0), s.A_hat(1, 1), 1e-10);
    // Arithmetic mean 2, harmonic mean 1/mean(1/a) < 2.
    EXPECT_LT(s.A_hat(0, 0), 2.0);
    EXPECT_GT(s.A_hat(0, 0), 1.86);
}

TEST(Cell, FluxPotentialsAntisymmetricAndDivergence) {
    const CorrectorSet s = compute_correctors(make_family("aniso2d", {0.5, 0.7, 0.3}), 32);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) EXPECT_EQ((s.b_at(i, j, k) + s.b_at(j, i, k)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(s.residuals.at("b"), 1e-8);
}

TEST(Cell, PoissonRejectsNonzeroMean) {
    SpectralGrid g(2, 8);
    EXPECT_THROW(solve_poisson_periodic(g, GridField::Ones(64), 1e-12), Error);
}

TEST(Cell, SaveLoadRoundTrip) {
    const CorrectorSet s = compute_correctors(make_family("trig2d", {0.5}), 16);
    const auto path = std::filesystem::temp_directory_path() / "twoscale_corr_test.bin";
    save_correctors(s, path.string());
    const CorrectorSet r = load_correctors(path.string());
    std::filesystem::remove(path);
    ASSERT_EQ(r.n, 16);
    EXPECT_EQ(r.chi[1], s.chi[1]);
    EXPECT_EQ(r.b[3], s.b[3]);
    EXPECT_EQ(r.A_hat, s.A_hat);
}

TEST(Cell, InterpolantReproducesGridValues) {
    const CorrectorSet s = compute_correctors(make_family("trig2d", {1.0}), 32);
    SpectralGrid g(2, 32);
    const TrigInterpolant t(g, s.chi[0]);
    EXPECT_NEAR(t.value(5.0 / 32, 7.0 / 32), s.chi[0][5 * 32 + 7], 1e-12);
}
