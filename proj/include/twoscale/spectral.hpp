#pragma once

#include "twoscale/fem.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cstdint>
#include <vector>

namespace twoscale {

struct EigenOptions {
    double window_fraction = 0.15;  // window half-width relative to the target
    double tol = 1e-10;             // relative residual ‖Kx - λMx‖ / ‖λMx‖
    double accept_tol = 1e-8;       // accepted if the iteration stagnates below this
    int max_iter = 300;
    int extra_vectors = 3;
    std::uint64_t seed = 12345;
};

// M mass-orthonormal eigenpairs nearest the target, with a separation certificate.
struct EigenCluster {
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    std::vector<double> values;  // ascending
    Eigen::MatrixXd vectors;     // full-length nodal vectors, one column per value
    int multiplicity = 0;
    double target = 0.0;
    double window = 0.0;  // half-width
    std::vector<double> residuals;
    double orthonormality_defect = 0.0;
    int count_in_certificate = 0;  // eigenvalues in [target - 1.5w, target + 1.5w] by inertia
    int iterations = 0;
};

// Block shift-invert subspace iteration with Rayleigh-Ritz at σ = target.
// Throws ClusterError when the certified count differs from M_expected.
EigenCluster eigen_cluster(const DiscreteSystem& sys, double target, int M_expected, const EigenOptions& opt = {});

struct ClusterMean {
    double lambda_bar = 0.0;
    double mu_bar = 0.0;  // mean of reciprocals
};
ClusterMean cluster_mean(const std::vector<double>& values);

// Mass-orthonormal bases of R(S0) and R(Sε) on one mesh; the ε basis is aligned to the
// homogenized one by orthogonal Procrustes on the mass Gram matrix.
struct ProjectionPair {
    const SpMat* mass = nullptr;
    Eigen::MatrixXd basis0, basis_eps;
    std::vector<double> values0, values_eps;
    Eigen::MatrixXd alignment;  // basis_eps = raw_eps * alignment
};
enum class Projector { S0, Seps };

ProjectionPair make_projection_pair(const SpMat& mass, const EigenCluster& c0, const EigenCluster& ceps);
Vec project(const ProjectionPair& pair, Projector which, const Vec& f);
// Mass-orthogonal projection onto the span of the basis columns (basis assumed mass-orthonormal).
Vec project_onto(const SpMat& mass, const Eigen::MatrixXd& basis, const Vec& f);

struct ProjectionChecks {
    double idempotence = 0.0;      // max ‖SSf - Sf‖ / ‖f‖
    double self_adjointness = 0.0; // max |⟨Sf,g⟩ - ⟨f,Sg⟩| / (‖f‖‖g‖)
    double orthonormality = 0.0;   // ‖BᵀMB - I‖_max
    int rank = 0;
    double resolvent = 0.0;        // max ‖u - Σ c_j φ_j/(z - μ_j)‖ / ‖g‖, z = μ0 + 1
};

// Projection laws on `samples` random vectors and the discrete resolvent identity
// (z - T0) u = g for g in the eigenspace, solved as (zK - M) u = K g on the free unknowns.
ProjectionChecks check_projection(const DiscreteSystem& sys, const EigenCluster& cluster, int samples,
                                  std::uint64_t seed);

// θ = -(λ0/M) Σ_j ⟨Kbl φ_j, φ_j⟩ in the mass inner product.
double theta_from_pairing(const SpMat& mass, const Eigen::MatrixXd& kbl_phi, const Eigen::MatrixXd& phis,
                          double lambda0);

// Random M x M orthogonal matrix (QR of a Gaussian matrix).
Eigen::MatrixXd random_rotation(int m, std::uint64_t seed);

// |μ̄ε - μ0 - M⁻¹ Σ_j ⟨(Tε - T0)φ0j, φ0j⟩|.
struct OsbornResult {
    double defect = 0.0;
    double mu_bar_eps = 0.0;
    double mu0 = 0.0;
    double pairing = 0.0;  // M⁻¹ Σ ⟨(Tε - T0)φ0j, φ0j⟩
};
OsbornResult osborn_diagnostic(const SourceSolver& t_eps, const SourceSolver& t0, const SpMat& mass,
                               const Eigen::MatrixXd& basis0, double mu0, const std::vector<double>& values_eps);

// Ψ^bl from a K^bl image k (full-length nodal field carrying its boundary trace):
// ψ = (I - S0)k + z with z = 0 on ∂Ω, (K0 - λ0 M) z = λ0 M (I - S0) k, and ⟨z, φ0j⟩ = 0,
// solved as one bordered sparse system with a multiplier per basis vector.
struct PsiBlResult {
    Vec psi;
    double bordered_residual = 0.0;
    double orthogonality_defect = 0.0;  // max |⟨ψ, φ0j⟩| / ‖ψ‖
    double boundary_defect = 0.0;       // max |ψ - k| on ∂Ω
    double harmonic_defect = 0.0;       // ‖(K0 k)_f‖ / (‖K0‖_1 ‖k‖_∞): how far k is from 𝓛0-harmonic
    double pde_residual = 0.0;          // ‖(K0 - λ0M)ψ - K0(I - S0)k‖_f relative
    Eigen::VectorXd multipliers;
};

class PsiBlSolver {
public:
    PsiBlSolver(const DiscreteSystem& sys0, const Eigen::MatrixXd& basis0, double lambda0);
    PsiBlResult solve(const Vec& kbl) const;

private:
    const DiscreteSystem* sys_;
    Eigen::MatrixXd basis_;
    double lambda0_;
    SpMat bordered_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace twoscale
