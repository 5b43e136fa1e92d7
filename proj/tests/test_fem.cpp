#include "twoscale/error.hpp"
#include "twoscale/fem.hpp"
#include "twoscale/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace twoscale;

namespace {

constexpr double kJ01Squared = 5.783185962946784;

std::shared_ptr<const Mesh> disk(double h) { return std::make_shared<const Mesh>(mesh_domain(Domain::disk(1.0), h)); }

}  // namespace

TEST(Fem, QuadratureExactness) {
    for (int order : {1, 2, 4}) {
        const auto& q = triangle_quadrature(order);
        double w = 0.0, x = 0.0;
        for (std::size_t i = 0; i < q.points.size(); ++i) {
            w += q.weights[i];
            x += q.weights[i] * q.points[i].x();
        }
        EXPECT_NEAR(w, 0.5, 1e-15);
        EXPECT_NEAR(x, 1.0 / 6.0, 1e-15);
    }
    // ∫ x² y² over the reference triangle = 1/180.
    const auto& q = triangle_quadrature(4);
    double s = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i)
        s += q.weights[i] * std::pow(q.points[i].x(), 2) * std::pow(q.points[i].y(), 2);
    EXPECT_NEAR(s, 1.0 / 180.0, 1e-15);
}

TEST(Fem, MassAndStiffnessBasics) {
    const auto m = disk(0.1);
    const auto sys = assemble(Tensor2::Identity(), m, BoundaryCondition::Neumann);
    const Vec one = Vec::Ones(m->num_vertices());
    EXPECT_NEAR(one.dot(sys.M * one), m->area(), 1e-12);
    EXPECT_LE((sys.K * one).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(sys.symmetry_defect(), 1e-14);
    // ∫|∇x1|² = area.
    Vec x1(m->num_vertices());
    for (int v = 0; v < m->num_vertices(); ++v) x1[v] = m->points[v].x();
    EXPECT_NEAR(x1.dot(sys.K * x1), m->area(), 1e-12);
}

TEST(Fem, ResolutionRuleEnforced) {
    const auto m = disk(0.05);
    EXPECT_THROW(assemble(make_family("trig2d", {1.0}), m, 0.1, BoundaryCondition::Dirichlet), ResolutionError);
    EXPECT_NO_THROW(assemble(make_family("trig2d", {1.0}), m, 0.4, BoundaryCondition::Dirichlet));
}

TEST(Fem, DiskTorsionSolution) {
    // -Δu = 1, u = 0 on the unit circle: u = (1 - r²)/4.
    const auto m = disk(0.05);
    const auto sys = assemble(Tensor2::Identity(), m, BoundaryCondition::Dirichlet);
    const Vec u = solve_source(sys, Vec::Ones(m->num_vertices()));
    double worst = 0.0;
    for (int v = 0; v < m->num_vertices(); ++v)
        worst = std::max(worst, std::abs(u[v] - 0.25 * (1.0 - m->points[v].squaredNorm())));
    EXPECT_LE(worst, 2e-3);
}

TEST(Fem, DirichletBoundaryData) {
    const auto m = disk(0.1);
    const auto sys = assemble(Tensor2::Identity(), m, BoundaryCondition::Dirichlet);
    // Linear harmonic data lie in the P1 space and are reproduced exactly.
    auto g = [](const Vec2& x) { return x.x() - 2.0 * x.y() + 0.5; };
    const Vec u = solve_source(sys, Vec::Zero(m->num_vertices()), g);
    double worst = 0.0;
    for (int v = 0; v < m->num_vertices(); ++v) worst = std::max(worst, std::abs(u[v] - g(m->points[v])));
    EXPECT_LE(worst, 1e-12);
}

TEST(Fem, NeumannSolveIsMeanZero) {
    const auto m = disk(0.1);
    const auto sys = assemble(Tensor2::Identity(), m, BoundaryCondition::Neumann);
    const SourceSolver s(sys);
    Vec f(m->num_vertices());
    for (int v = 0; v < m->num_vertices(); ++v) f[v] = m->points[v].x();
    const Vec u = s.apply_T(f);
    EXPECT_NEAR(Vec::Ones(m->num_vertices()).dot(sys.M * u), 0.0, 1e-12);
    EXPECT_LE(s.relative_residual(u, sys.M * f), 1e-10);
}

TEST(Fem, DiskEigenvalueConvergesAtSecondOrder) {
    std::vector<double> err;
    for (double h : {0.1, 0.05}) {
        const auto sys = assemble(Tensor2::Identity(), disk(h), BoundaryCondition::Dirichlet);
        err.push_back(std::abs(eigen_cluster(sys, kJ01Squared, 1).values[0] - kJ01Squared));
    }
    EXPECT_GT(std::log2(err[0] / err[1]), 1.8);
}

TEST(Fem, GradientRecoveryAndTransferExactForLinear) {
    const auto m = disk(0.1);
    Vec u(m->num_vertices());
    for (int v = 0; v < m->num_vertices(); ++v) u[v] = 2.0 * m->points[v].x() - 3.0 * m->points[v].y() + 1.0;
    const auto g = recover_gradient(*m, u);
    EXPECT_LE((g.col(0).array() - 2.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE((g.col(1).array() + 3.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE(recover_hessian(*m, u).cwiseAbs().maxCoeff(), 1e-10);
    const auto fine = disk(0.07);
    const Vec t = PointLocator(m).transfer(u, *fine);
    double worst = 0.0;
    for (int v = 0; v < fine->num_vertices(); ++v) {
        if (fine->boundary[v]) continue;
        const Vec2& x = fine->points[v];
        worst = std::max(worst, std::abs(t[v] - (2.0 * x.x() - 3.0 * x.y() + 1.0)));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Fem, VertexAreasSumToArea) {
    const auto m = disk(0.1);
    EXPECT_NEAR(vertex_areas(*m).sum(), m->area(), 1e-12);
}
