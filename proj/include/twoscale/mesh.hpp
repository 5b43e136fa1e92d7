#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace twoscale {

using Vec2 = Eigen::Vector2d;

// Disk of radius a (a == b), ellipse with semi-axes a, b, or the interval (0, a).
struct Domain {
    enum class Kind { Disk, Ellipse, Interval };
    Kind kind = Kind::Disk;
    double a = 1.0;
    double b = 1.0;

    static Domain disk(double r) { return {Kind::Disk, r, r}; }
    static Domain ellipse(double a, double b) { return {Kind::Ellipse, a, b}; }
    static Domain interval(double length) { return {Kind::Interval, length, 0.0}; }

    int dim() const { return kind == Kind::Interval ? 1 : 2; }
    // Distance to the boundary; negative outside.
    double distance(const Vec2& x) const;
    Vec2 closest_boundary_point(const Vec2& x) const;
    Vec2 outward_normal(const Vec2& boundary_point) const;
    double min_radius() const { return std::min(a, kind == Kind::Interval ? a : b); }
    std::string describe() const;
};

struct Mesh {
    int dim = 2;
    Domain domain;
    std::vector<Vec2> points;
    // Triangles (counter-clockwise) in 2D; intervals {i, j, -1} in 1D.
    std::vector<std::array<int, 3>> cells;
    std::vector<char> boundary;
    std::vector<Vec2> normals;  // outward unit normal at boundary vertices, zero elsewhere
    // Boundary edges in counter-clockwise order around the domain (2D only).
    std::vector<std::array<int, 2>> boundary_edges;
    double h = 0.0;                // measured max edge length
    double lattice_spacing = 0.0;  // spacing ℓ of the interior square lattice (0 if none)
    double min_angle_deg = 0.0;

    int num_vertices() const { return static_cast<int>(points.size()); }
    int num_cells() const { return static_cast<int>(cells.size()); }
    double area() const;
};

// Lattice-based triangulation: square lattice nodes (iℓ, jℓ) at distance >= keep*ℓ
// from the boundary, boundary vertices spaced about ℓ on the exact curve, Delaunay
// connectivity. Interior lattice squares are split along the (1,0)-(0,1) diagonal.
// Throws Error when the minimum angle falls below 20 degrees.
Mesh mesh_domain(const Domain& domain, double spacing, double keep = 0.5);

// Uniform mesh of (0, length) with the given number of cells.
Mesh mesh_interval(double length, int cells);

void recompute_mesh_metrics(Mesh& mesh);

// Text format, one item per line:
//   twoscale-mesh 1
//   domain <disk|ellipse|interval> <a> <b>
//   lattice <spacing>
//   vertices <n>          followed by n lines "x y"
//   cells <m>             followed by m lines "i j k" (k = -1 for intervals)
//   boundary <n>          followed by n lines with 0 or 1
void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(const std::string& path);

// Nodal field dump: header "twoscale-field <n>" then "x y value" per vertex.
void write_field(const Mesh& mesh, const Eigen::VectorXd& values, const std::string& path);

}  // namespace twoscale
