#pragma once

#include "twoscale/coeff.hpp"
#include "twoscale/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace twoscale {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

enum class BoundaryCondition { Dirichlet, Neumann };

// Quadrature on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2.
struct TriangleQuadrature {
    std::vector<Vec2> points;
    std::vector<double> weights;
};
// Degree 1 (centroid), 2 (3 points) or 4 (6 points).
const TriangleQuadrature& triangle_quadrature(int order);

// P1 stiffness and mass operators on a mesh, plus the elimination maps for Dirichlet data.
// Full matrices act on all vertices; the *_ff blocks act on the free unknowns.
struct DiscreteSystem {
    std::shared_ptr<const Mesh> mesh;
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    double eps = 0.0;  // 0 for a constant tensor
    int quad_order = 4;
    SpMat K, M;
    std::vector<int> free_dofs;   // vertex ids of the unknowns
    std::vector<int> fixed_dofs;  // Dirichlet boundary vertices
    std::vector<int> dof_of;      // vertex -> unknown index, -1 if fixed
    SpMat Kff, Mff, Kfb;

    int num_free() const { return static_cast<int>(free_dofs.size()); }
    Vec restrict_free(const Vec& full) const;
    Vec extend_free(const Vec& free, const Vec* boundary_values = nullptr) const;
    double mass_inner(const Vec& a, const Vec& b) const { return a.dot(M * b); }
    double mass_norm(const Vec& a) const { return std::sqrt(std::max(0.0, a.dot(M * a))); }
    double symmetry_defect() const;
};

// Resolution rule: the lattice spacing must not exceed eps / resolution.
// Throws ResolutionError with the required spacing otherwise.
DiscreteSystem assemble(const CoefficientField& field, std::shared_ptr<const Mesh> mesh, double eps,
                        BoundaryCondition bc, int quad_order = 4, int resolution = 8);
DiscreteSystem assemble(const Tensor2& A, std::shared_ptr<const Mesh> mesh, BoundaryCondition bc);

// Direct sparse factorization of the free block, shared read-only across right-hand sides.
// Dirichlet: u_f = Kff⁻¹ (F_f - Kfb g_b). Neumann: the load is orthogonalized against
// constants, one vertex is pinned, and the result is shifted to zero mass-mean.
class SourceSolver {
public:
    explicit SourceSolver(const DiscreteSystem& sys);

    // load is a full-length dual vector (e.g. M f); dirichlet holds boundary values (full length).
    Vec solve_load(const Vec& load, const Vec* dirichlet = nullptr) const;
    // T f: solution with load M f and zero boundary data.
    Vec apply_T(const Vec& f) const { return solve_load(sys_->M * f); }
    // Mean of the load removed by the last Neumann solve, relative to its l1 size.
    double last_compatibility_defect() const { return last_defect_; }
    double relative_residual(const Vec& u, const Vec& load) const;

private:
    const DiscreteSystem* sys_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    Vec ones_mass_;
    double total_mass_ = 0.0;
    int pinned_ = -1;
    mutable double last_defect_ = 0.0;
};

// Convenience wrapper: u = T f with optional Dirichlet data function.
Vec solve_source(const DiscreteSystem& sys, const Vec& f,
                 const std::function<double(const Vec2&)>& dirichlet = nullptr);

// A 1-periodic function on the torus with gradient (with respect to y).
struct PeriodicFunction {
    std::function<double(const Vec2&)> value;
    std::function<Vec2(const Vec2&)> gradient;
};

// Nodal values f(x/ε).
Vec interpolate_two_scale(const Mesh& mesh, const PeriodicFunction& f, double eps);
// Nodal values of ∇_x [f(x/ε)] = (∇_y f)(x/ε) / ε, one row per vertex.
Eigen::MatrixX2d interpolate_two_scale_gradient(const Mesh& mesh, const PeriodicFunction& f, double eps);

// Gradient of a P1 field on each cell (constant per cell).
Eigen::MatrixX2d cell_gradients(const Mesh& mesh, const Vec& u);
// Area-weighted average of cell gradients at each vertex.
Eigen::MatrixX2d recover_gradient(const Mesh& mesh, const Vec& u);
// Recovered Hessian: cell gradients of the recovered gradient averaged back to vertices.
// Columns are (u_11, u_12, u_22).
Eigen::MatrixX3d recover_hessian(const Mesh& mesh, const Vec& u);

// Point location on a triangle mesh with a uniform bucket grid.
class PointLocator {
public:
    explicit PointLocator(std::shared_ptr<const Mesh> mesh);
    // Cell containing x and barycentric coordinates; points outside the mesh are
    // projected onto the nearest boundary edge.
    std::pair<int, Eigen::Vector3d> locate(const Vec2& x) const;
    double evaluate(const Vec& u, const Vec2& x) const;
    // Values of u (defined on this locator's mesh) at the vertices of another mesh.
    Vec transfer(const Vec& u, const Mesh& target) const;
    const Mesh& mesh() const { return *mesh_; }

private:
    std::shared_ptr<const Mesh> mesh_;
    Vec2 lo_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
    bool inside(int c, const Vec2& x, Eigen::Vector3d& bary, double tol) const;
};

// Lumped vertex areas (one third of adjacent triangle areas).
Vec vertex_areas(const Mesh& mesh);

}  // namespace twoscale
