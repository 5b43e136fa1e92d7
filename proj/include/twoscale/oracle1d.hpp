#pragma once

#include "twoscale/coeff.hpp"

#include <vector>

namespace twoscale {

// Dirichlet problem -(a(x/ε) u')' = λ u on (0,1) with ε = 1/n.
// Closed forms are available for the identity and trig1d families.
struct Oracle1DCase {
    CoefficientField field;
    int k = 1;
    double a_hat = 1.0;
    double phase = 0.0;  // φ of trig1d; unused for identity
    bool trivial = false;

    double lambda0() const;
    double phi0(double x) const;
    double dphi0(double x) const;
    double chi(double y) const;
    double dchi(double y) const;
    double upsilon(double y) const;
    double chi0() const { return chi(0.0); }
};

Oracle1DCase make_oracle_case(const CoefficientField& field, int k);

struct ShootingResult {
    double lambda = 0.0;
    std::vector<double> x;
    std::vector<double> u;   // L²-normalized, sign fixed by ⟨u, φ0⟩ > 0
    std::vector<double> du;  // derivative u'
};

// k-th eigenpair by Prüfer-angle shooting with an adaptive 7/8-order Runge-Kutta
// integrator and a bracketed TOMS 748 root search. Throws Error on bracket failure.
ShootingResult eigen_exact_eps(const Oracle1DCase& c, int n, int k, double tol,
                               const std::vector<double>& samples = {});

struct PsiBl1D {
    double amplitude = 0.0;  // ψ(x) = amplitude * cos(kπx)
    double theta = 0.0;
    int k = 1;
    double value(double x) const;
    double derivative(double x) const;
};

PsiBl1D psi_bl_exact(const Oracle1DCase& c);

// K^bl φ0: linear interpolant of the boundary values -χ(0) φ0'(0) and -χ(0) φ0'(1).
double kbl_phi0_exact(const Oracle1DCase& c, double x);

struct Residual1DRow {
    int n = 0;
    double eps = 0.0;
    double lambda_eps = 0.0;
    double lambda0 = 0.0;
    double r0 = 0.0, r1 = 0.0;
    double e0 = 0.0, e1 = 0.0, e2 = 0.0;
};

std::vector<Residual1DRow> expansion_residuals_1d(const Oracle1DCase& c, const std::vector<int>& ns,
                                                  double tol = 1e-10);

}  // namespace twoscale
