#include "twoscale/error.hpp"
#include "twoscale/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace twoscale;

TEST(Mesh, DiskDistance) {
    const Domain d = Domain::disk(1.0);
    EXPECT_DOUBLE_EQ(d.distance(Vec2(0.0, 0.0)), 1.0);
    EXPECT_NEAR(d.distance(Vec2(0.6, 0.0)), 0.4, 1e-15);
    EXPECT_LT(d.distance(Vec2(1.5, 0.0)), 0.0);
}

TEST(Mesh, EllipseDistanceOnAxes) {
    const Domain d = Domain::ellipse(2.0, 1.0);
    EXPECT_NEAR(d.distance(Vec2(0.0, 0.0)), 1.0, 1e-12);
    EXPECT_NEAR(d.distance(Vec2(1.5, 0.0)), 0.5, 1e-12);
    const Vec2 p = d.closest_boundary_point(Vec2(0.7, 0.4));
    EXPECT_NEAR(p.x() * p.x() / 4.0 + p.y() * p.y(), 1.0, 1e-12);
}

TEST(Mesh, DiskQuality) {
    const Mesh m = mesh_domain(Domain::disk(1.0), 0.05);
    EXPECT_GE(m.min_angle_deg, 20.0);
    EXPECT_NEAR(m.area(), M_PI, 0.01);
    EXPECT_LE(m.h, 0.05 * 2.0);
    EXPECT_DOUBLE_EQ(m.lattice_spacing, 0.05);
    for (int v = 0; v < m.num_vertices(); ++v)
        if (m.boundary[v]) {
            EXPECT_NEAR(m.points[v].norm(), 1.0, 1e-12);
            EXPECT_NEAR(m.normals[v].dot(m.points[v]), 1.0, 1e-12);
        }
}

TEST(Mesh, BoundaryEdgesFormCounterClockwiseLoop) {
    const Mesh m = mesh_domain(Domain::ellipse(1.0, 0.7), 0.04);
    double signed_area = 0.0;
    for (const auto& e : m.boundary_edges) {
        const Vec2 &a = m.points[e[0]], &b = m.points[e[1]];
        signed_area += 0.5 * (a.x() * b.y() - a.y() * b.x());
    }
    EXPECT_GT(signed_area, 0.0);
    for (std::size_t i = 0; i < m.boundary_edges.size(); ++i)
        EXPECT_EQ(m.boundary_edges[i][1], m.boundary_edges[(i + 1) % m.boundary_edges.size()][0]);
}

TEST(Mesh, InteriorVerticesOnLattice) {
    const double s = 1.0 / 64;
    const Mesh m = mesh_domain(Domain::disk(1.0), s);
    for (int v = 0; v < m.num_vertices(); ++v)
        if (!m.boundary[v]) {
            EXPECT_NEAR(m.points[v].x() / s, std::round(m.points[v].x() / s), 1e-9);
            EXPECT_NEAR(m.points[v].y() / s, std::round(m.points[v].y() / s), 1e-9);
        }
}

TEST(Mesh, IntervalMesh) {
    const Mesh m = mesh_interval(1.0, 10);
    EXPECT_EQ(m.dim, 1);
    EXPECT_EQ(m.num_vertices(), 11);
    EXPECT_TRUE(m.boundary.front() && m.boundary.back());
}

TEST(Mesh, WriteReadRoundTrip) {
    const Mesh m = mesh_domain(Domain::disk(1.0), 0.1);
    const auto path = std::filesystem::temp_directory_path() / "twoscale_mesh_test.txt";
    write_mesh(m, path.string());
    const Mesh r = read_mesh(path.string());
    std::filesystem::remove(path);
    ASSERT_EQ(r.num_vertices(), m.num_vertices());
    ASSERT_EQ(r.num_cells(), m.num_cells());
    EXPECT_NEAR((r.points[7] - m.points[7]).norm(), 0.0, 1e-15);
    EXPECT_EQ(r.cells[5], m.cells[5]);
}
