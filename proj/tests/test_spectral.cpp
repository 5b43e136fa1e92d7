#include "twoscale/error.hpp"
#include "twoscale/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace twoscale;

namespace {

constexpr double kJ11Squared = 14.681970642123893;

struct DiskFixture {
    std::shared_ptr<const Mesh> mesh = std::make_shared<const Mesh>(mesh_domain(Domain::disk(1.0), 0.1));
    DiscreteSystem sys = assemble(Tensor2::Identity(), mesh, BoundaryCondition::Dirichlet);
};

}  // namespace

TEST(Spectral, DoubletClusterIsCertified) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    ASSERT_EQ(c.values.size(), 2u);
    EXPECT_NEAR(c.values[0], kJ11Squared, 0.2);
    EXPECT_LE(c.orthonormality_defect, 1e-10);
    EXPECT_EQ(c.count_in_certificate, 2);
    EXPECT_THROW(eigen_cluster(f.sys, kJ11Squared, 1), ClusterError);
}

TEST(Spectral, ProjectionLaws) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    const auto p = check_projection(f.sys, c, 20, 7);
    EXPECT_LE(p.idempotence, 1e-12);
    EXPECT_LE(p.self_adjointness, 1e-12);
    EXPECT_LE(p.orthonormality, 1e-10);
    EXPECT_EQ(p.rank, 2);
    EXPECT_LE(p.resolvent, 1e-8);
}

TEST(Spectral, ProjectionPairAlignment) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    const auto pair = make_projection_pair(f.sys.M, c, c);
    Eigen::MatrixXd g = pair.basis_eps.transpose() * (f.sys.M * pair.basis0);
    EXPECT_LE((g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    const Vec x = c.vectors.col(1);
    EXPECT_LE((project(pair, Projector::S0, x) - x).norm(), 1e-10 * x.norm());
}

TEST(Spectral, RandomRotationIsOrthogonal) {
    const auto q = random_rotation(3, 11);
    EXPECT_LE((q.transpose() * q - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(random_rotation(3, 11), q);
}

TEST(Spectral, ClusterMean) {
    const auto m = cluster_mean({2.0, 4.0});
    EXPECT_DOUBLE_EQ(m.lambda_bar, 3.0);
    EXPECT_DOUBLE_EQ(m.mu_bar, 0.375);
}

TEST(Spectral, ThetaPairingIsRotationInvariant) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    Eigen::Matrix2d a;
    a << 0.3, -0.1, 0.2, 0.5;
    const Eigen::MatrixXd k = c.vectors * a;
    const double lambda0 = cluster_mean(c.values).lambda_bar;
    const double t = theta_from_pairing(f.sys.M, k, c.vectors, lambda0);
    EXPECT_NEAR(t, -lambda0 * 0.4, 1e-9);
    const auto r = random_rotation(2, 5);
    EXPECT_NEAR(theta_from_pairing(f.sys.M, c.vectors * a * r, c.vectors * r, lambda0), t, 1e-12);
}

TEST(Spectral, OsbornVanishesForEqualOperators) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    const SourceSolver t(f.sys);
    const double mu0 = cluster_mean(c.values).mu_bar;
    const auto o = osborn_diagnostic(t, t, f.sys.M, c.vectors, mu0, c.values);
    EXPECT_LE(o.defect, 1e-12);
}

TEST(Spectral, PsiBlSolveSatisfiesConstraints) {
    DiskFixture f;
    const auto c = eigen_cluster(f.sys, kJ11Squared, 2);
    const double lambda0 = cluster_mean(c.values).lambda_bar;
    const PsiBlSolver solver(f.sys, c.vectors, lambda0);
    Vec k(f.mesh->num_vertices());
    for (int v = 0; v < f.mesh->num_vertices(); ++v) k[v] = f.mesh->points[v].x() * f.mesh->points[v].y();
    const auto r = solver.solve(k);
    EXPECT_LE(r.orthogonality_defect, 1e-10);
    EXPECT_LE(r.boundary_defect, 1e-12);
    EXPECT_LE(r.pde_residual, 1e-8);
}
