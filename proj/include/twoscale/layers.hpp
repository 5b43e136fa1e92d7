#pragma once

#include "twoscale/cell.hpp"
#include "twoscale/fem.hpp"

#include <memory>
#include <vector>

namespace twoscale {

// One boundary-layer solve 𝓛ε v = 0 in Ω with oscillating Dirichlet data.
struct LayerSolve {
    double eps = 0.0;
    Vec v;              // full nodal field
    Vec boundary_data;  // full length, nonzero only on boundary vertices
    double residual = 0.0;
    double boundary_defect = 0.0;  // max |v - data| on boundary vertices
};

// Data -χ_j(x/ε) ∂_j u0 at boundary vertices; grad_u0 holds one row per vertex.
LayerSolve v1_eps(const SourceSolver& solver, const DiscreteSystem& sys, const std::vector<PeriodicFunction>& chi,
                  double eps, const Eigen::MatrixX2d& grad_u0);
// Data -Υ_ij(x/ε) ∂_ij u0; hess_u0 columns are (u_11, u_12, u_22); upsilon[i*2 + j].
LayerSolve v2_eps(const SourceSolver& solver, const DiscreteSystem& sys,
                  const std::vector<PeriodicFunction>& upsilon, double eps, const Eigen::MatrixX3d& hess_u0);

struct LadderLevel {
    double eps = 0.0;
    std::shared_ptr<const Mesh> mesh;
    Vec v;
};

// K^bl g estimate. With method Finest the smallest-ε layer on the finest mesh is returned.
// With method Harmonic every rung is first replaced by its least-squares fit, over vertices
// at distance >= interior from the boundary, by Â-harmonic polynomials of the given degree
// (the limit layer solves the homogenized equation); the fit removes the boundary-layer
// oscillation that keeps the raw rungs from converging. The error bound is the mass-norm
// difference of the two smallest (processed) rungs on the finest mesh.
struct KblOptions {
    enum class Method { Finest, Harmonic } method = Method::Finest;
    Tensor2 a_hat = Tensor2::Identity();
    int degree = 6;
    double interior = 0.2;
};

struct KblEstimate {
    Vec estimate;                    // on the finest mesh
    Vec previous;                    // same estimate from the second-smallest rung
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> eps;         // ladder, descending
    std::vector<double> differences; // raw ‖v(ε_i) - v(ε_{i+1})‖, i = 0..n-2
    std::vector<double> norms;       // raw ‖v(ε_i)‖
    std::vector<double> fitted_differences;  // same for the harmonic fits (Harmonic only)
    std::vector<double> fit_misfit;  // interior RMS of v - fit per rung (Harmonic only)
    double error_bound = 0.0;
    double slope = 0.0;              // log-log decay of the raw differences vs ε_i
    bool homogenization_observed = true;
};

// ladder must be sorted by descending ε with the finest mesh last; mass is the
// finest-mesh mass matrix.
KblEstimate estimate_Kbl(const std::vector<LadderLevel>& ladder, const SpMat& mass, const KblOptions& opt = {});

// Least-squares fit of v by Â-harmonic polynomials on vertices with distance >= interior;
// returns the fit at every vertex. misfit receives the weighted interior RMS of v - fit.
Vec harmonic_fit(const Mesh& mesh, const Vec& v, const Tensor2& a_hat, int degree, double interior,
                 double* misfit = nullptr);

// Scalar Neumann layer data g = d/ds [b_12k(x/ε) ∂_k u0] along the counter-clockwise boundary,
// i.e. (1/2) T_ij ∇(b_ijk(x/ε) ∂_k u0) with T_ij = n_i e_j - n_j e_i.
struct NeumannData {
    Vec potential;  // F = b_12k(x/ε) ∂_k u0 at boundary vertices
    Vec load;       // weak boundary load ∫ g v ds, full length
    double l2_norm = 0.0;        // ‖g‖_{L²(∂Ω)}
    double compatibility = 0.0;  // |∮ g ds|
};
// Throws Error if the compatibility integral exceeds tol.
NeumannData neumann_data(const CorrectorSet& correctors, const Mesh& mesh, double eps,
                         const Eigen::MatrixX2d& grad_u0, double tol = 1e-8);

// Neumann layer: 𝓛ε v = 0 with conormal derivative data, mean-zero solution.
struct NeumannLayer {
    Vec v;
    double residual = 0.0;
    double compatibility_defect = 0.0;
};
NeumannLayer neumann_layer(const SourceSolver& solver, const NeumannData& data);

}  // namespace twoscale
