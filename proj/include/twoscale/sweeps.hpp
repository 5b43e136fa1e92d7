#pragma once

#include "twoscale/config.hpp"
#include "twoscale/lattice.hpp"
#include "twoscale/oracle1d.hpp"
#include "twoscale/report.hpp"

#include <string>

namespace twoscale {

struct SweepOptions {
    bool gradient = true;          // weighted interior gradient residuals (M = 1 only)
    bool rotation_check = true;    // re-solve the finest layers with a rotated basis (M > 1)
    bool projection_checks = true; // projection laws on the coarsest row
    int projection_samples = 20;
    std::string fields_dir;        // mesh-field dumps when non-empty
};

// Full Dirichlet pipeline per ε: mesh, ε- and homogenized clusters, layer ladder for
// K^bl, θ by pairing and by fit, Ψ^bl, and every residual column.
ExpansionReport sweep_dirichlet(const ExperimentConfig& cfg, const SweepOptions& opt = {});
// Neumann clusters with θ estimated only by the eigenvalue fit, plus layer-data checks.
ExpansionReport sweep_neumann(const ExperimentConfig& cfg, const SweepOptions& opt = {});
// Second-order H¹ residual of the source problem u_ε = T_ε f.
ExpansionReport h1_sweep(const ExperimentConfig& cfg);
// Exact one-dimensional suite.
ExpansionReport oracle1d_report(double phase, const std::vector<int>& ns);
// Max nodal gap between the deflated P1 boundary-layer solve and the closed form.
double psi_bl_1d_discrepancy(const Oracle1DCase& c, int cells);
// Cell solves and their checks.
ExpansionReport correctors_report(const ExperimentConfig& cfg);

// λ̄_ε - λ0 = θ ε + r ε^p by least squares. The error bar combines the standard error
// of θ (p = 2) with the shift of θ when p = 1.5.
ThetaEstimate empirical_theta(const std::vector<double>& eps, const std::vector<double>& gap);

// Per-row helpers, exposed for tests.
struct GradientResiduals {
    double w0 = 0.0;  // ‖δ(∇φε - (I + ∇χ^ε)∇φ0)‖
    double w1 = 0.0;  // with the first-order terms subtracted
};
GradientResiduals weighted_gradient_residual(const Mesh& mesh, double eps, const LatticeCorrectors& cell,
                                             const Vec& phi_eps, const Vec& phi0, const Vec& psi);

struct H1Residual {
    double residual = 0.0;       // ‖R‖_{H¹}
    double zeroth = 0.0;         // ‖u_ε - u0‖_{H¹}
    double v1_norm = 0.0, v2_grad = 0.0;
};
H1Residual h1_expansion_residual(const CoefficientField& field, const LatticeCorrectors& cell,
                                 std::shared_ptr<const Mesh> mesh, double eps, double f);

}  // namespace twoscale
