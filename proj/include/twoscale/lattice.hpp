#pragma once

#include "twoscale/coeff.hpp"
#include "twoscale/fem.hpp"

#include <Eigen/Dense>

#include <vector>

namespace twoscale {

// P1 cell problems on the n x n periodic lattice of the unit torus, triangulated
// exactly like the interior of a lattice mesh: each square (i,j) is split into
// (i,j),(i+1,j),(i,j+1) and (i+1,j),(i+1,j+1),(i,j+1). Using the same element
// space and quadrature as the mesh makes Â_h the homogenized tensor of the
// discrete ε-problem, not just an approximation of the continuous Â.
struct LatticeCorrectors {
    int n = 0;
    std::vector<Eigen::VectorXd> chi;      // chi[j], nodal values at (i/n, j/n), index i*n + j
    std::vector<Eigen::VectorXd> upsilon;  // upsilon[i*2 + j]
    Tensor2 A_hat = Tensor2::Zero();
    double chi_residual = 0.0;
    double upsilon_residual = 0.0;
    double upsilon_rhs_mean = 0.0;

    PeriodicFunction chi_function(int j) const;
    PeriodicFunction upsilon_function(int i, int j) const;
};

// Throws ConfigError unless the field is two-dimensional and n >= 2.
LatticeCorrectors lattice_correctors(const CoefficientField& field, int n, int quad_order = 4);

// P1 interpolation and piecewise gradient of a lattice field at y (reduced mod 1).
double lattice_value(const Eigen::VectorXd& f, int n, const Vec2& y);
Vec2 lattice_gradient(const Eigen::VectorXd& f, int n, const Vec2& y);

}  // namespace twoscale
