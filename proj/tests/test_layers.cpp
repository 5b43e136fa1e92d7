#include "twoscale/cell.hpp"
#include "twoscale/error.hpp"
#include "twoscale/layers.hpp"
#include "twoscale/lattice.hpp"

#include <gtest/gtest.h>

#include <memory>

using namespace twoscale;

namespace {

std::shared_ptr<const Mesh> disk(double h) { return std::make_shared<const Mesh>(mesh_domain(Domain::disk(1.0), h)); }

}  // namespace

TEST(Layers, HarmonicFitReproducesHarmonicPolynomials) {
    const auto m = disk(0.05);
    Tensor2 a;
    a << 2.0, 0.0, 0.0, 1.0;
    // 2 u_11 + u_22 = 0.
    Vec u(m->num_vertices());
    for (int v = 0; v < m->num_vertices(); ++v) {
        const Vec2& x = m->points[v];
        u[v] = x.x() * x.x() - 2.0 * x.y() * x.y() + 0.5 * x.x() - 1.0;
    }
    double misfit = 1.0;
    const Vec fit = harmonic_fit(*m, u, a, 4, 0.2, &misfit);
    EXPECT_LE((fit - u).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(misfit, 1e-10);
}

TEST(Layers, HarmonicFitRejectsBadInput) {
    const auto m = disk(0.1);
    const Vec u = Vec::Zero(m->num_vertices());
    EXPECT_THROW(harmonic_fit(*m, u, -Tensor2::Identity(), 4, 0.2), ConfigError);
    EXPECT_THROW(harmonic_fit(*m, u, Tensor2::Identity(), -1, 0.2), ConfigError);
}

TEST(Layers, IdentityLayerDataVanish) {
    const auto m = disk(0.05);
    const auto sys = assemble(make_family("identity", {}), m, 0.4, BoundaryCondition::Dirichlet);
    const SourceSolver s(sys);
    const auto cell = lattice_correctors(make_family("identity", {}), 8);
    const Eigen::MatrixX2d grad = Eigen::MatrixX2d::Ones(m->num_vertices(), 2);
    const auto l = v1_eps(s, sys, {cell.chi_function(0), cell.chi_function(1)}, 0.4, grad);
    EXPECT_LE(l.v.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Layers, V1MatchesBoundaryData) {
    const auto m = disk(0.025);
    const auto field = make_family("trig2d", {1.0});
    const double eps = 0.2;
    const auto sys = assemble(field, m, eps, BoundaryCondition::Dirichlet);
    const SourceSolver s(sys);
    const auto cell = lattice_correctors(field, 8);
    Eigen::MatrixX2d grad(m->num_vertices(), 2);
    for (int v = 0; v < m->num_vertices(); ++v) grad.row(v) = m->points[v].transpose();
    const auto l = v1_eps(s, sys, {cell.chi_function(0), cell.chi_function(1)}, eps, grad);
    EXPECT_LE(l.boundary_defect, 1e-12);
    EXPECT_LE(l.residual, 1e-10);
    EXPECT_GT(l.boundary_data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Layers, FinestEstimateIsLastRung) {
    const auto m = disk(0.1);
    const Vec one = Vec::Ones(m->num_vertices());
    std::vector<LadderLevel> ladder{{0.4, m, 1.2 * one}, {0.2, m, 1.1 * one}, {0.1, m, 1.05 * one}};
    const auto sys = assemble(Tensor2::Identity(), m, BoundaryCondition::Dirichlet);
    const auto e = estimate_Kbl(ladder, sys.M);
    EXPECT_LE((e.estimate - 1.05 * one).norm(), 1e-14);
    EXPECT_LE((e.previous - 1.1 * one).norm(), 1e-14);
    ASSERT_EQ(e.differences.size(), 2u);
    EXPECT_NEAR(e.error_bound, 0.05 * std::sqrt(m->area()), 1e-12);
    EXPECT_NEAR(e.slope, 1.0, 1e-12);
}

TEST(Layers, NeumannDataIsCompatible) {
    const auto m = disk(0.025);
    const auto cs = compute_correctors(make_family("trig2d", {1.0}), 32);
    Eigen::MatrixX2d grad(m->num_vertices(), 2);
    for (int v = 0; v < m->num_vertices(); ++v) grad.row(v) << m->points[v].y(), -m->points[v].x();
    const auto d = neumann_data(cs, *m, 0.2, grad);
    EXPECT_LE(d.compatibility, 1e-10);
    EXPECT_NEAR(d.load.sum(), 0.0, 1e-10);
    const auto sys = assemble(make_family("trig2d", {1.0}), m, 0.2, BoundaryCondition::Neumann);
    const SourceSolver s(sys);
    const auto l = neumann_layer(s, d);
    EXPECT_LE(l.residual, 1e-10);
    EXPECT_NEAR(Vec::Ones(m->num_vertices()).dot(sys.M * l.v), 0.0, 1e-12);
}
