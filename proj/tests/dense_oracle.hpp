#pragma once

// Dense re-implementation of the collocation cell problems: explicit Fourier
// differentiation matrices, Kronecker products and minimum-norm least squares.

#include "twoscale/cell.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace dense_oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Even-N periodic differentiation on [0, 1): D_jk = π (-1)^{j-k} cot(π (j-k) / N).
inline MatrixXd diff_matrix(int n) {
    MatrixXd d = MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (j != k) d(j, k) = M_PI * ((j - k) % 2 == 0 ? 1.0 : -1.0) / std::tan(M_PI * (j - k) / n);
    return d;
}

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

inline VectorXd min_norm_solve(const MatrixXd& a, const VectorXd& b) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a);
    cod.setThreshold(1e-10);
    return cod.solve(b);
}

struct DenseCell {
    int n = 0;
    std::vector<MatrixXd> d;       // d[k] differentiates along axis k
    std::vector<VectorXd> a;       // a[k*2 + l]
    MatrixXd op;                   // -Σ D_k diag(a_kl) D_l
    std::vector<VectorXd> chi, upsilon, b;
    Eigen::Matrix2d a_hat = Eigen::Matrix2d::Zero();
};

inline DenseCell solve_dense_2d(const twoscale::CoefficientField& field, int n) {
    DenseCell c;
    c.n = n;
    const MatrixXd d1 = diff_matrix(n), id = MatrixXd::Identity(n, n);
    c.d = {kron(d1, id), kron(id, d1)};
    const int size = n * n;
    c.a.assign(4, VectorXd(size));
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) {
            const auto t = field.sample(static_cast<double>(i1) / n, static_cast<double>(i2) / n);
            for (int k = 0; k < 4; ++k) c.a[k][i1 * n + i2] = t(k / 2, k % 2);
        }
    c.op = MatrixXd::Zero(size, size);
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) c.op -= c.d[k] * c.a[k * 2 + l].asDiagonal() * c.d[l];
    for (int j = 0; j < 2; ++j) {
        VectorXd rhs = VectorXd::Zero(size);
        for (int k = 0; k < 2; ++k) rhs += c.d[k] * c.a[k * 2 + j];
        c.chi.push_back(min_norm_solve(c.op, rhs));
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            VectorXd s = c.a[i * 2 + j];
            for (int k = 0; k < 2; ++k) s += c.a[i * 2 + k].cwiseProduct(c.d[k] * c.chi[j]);
            c.a_hat(i, j) = s.mean();
        }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            VectorXd rhs = c.a[i * 2 + j].array() - c.a_hat(i, j);
            for (int k = 0; k < 2; ++k) {
                rhs += c.a[i * 2 + k].cwiseProduct(c.d[k] * c.chi[j]);
                rhs += c.d[k] * c.a[k * 2 + i].cwiseProduct(c.chi[j]);
            }
            c.upsilon.push_back(min_norm_solve(c.op, rhs));
        }
    // Δ f_jk = g_jk, b_ijk = D_i f_jk - D_j f_ik.
    const MatrixXd lap = c.d[0] * c.d[0] + c.d[1] * c.d[1];
    std::vector<VectorXd> f;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            VectorXd g = c.a[j * 2 + k].array() - c.a_hat(j, k);
            for (int l = 0; l < 2; ++l) g += c.a[j * 2 + l].cwiseProduct(c.d[l] * c.chi[k]);
            f.push_back(min_norm_solve(lap, g));
        }
    c.b.assign(8, VectorXd::Zero(size));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                if (i != j) c.b[(i * 2 + j) * 2 + k] = c.d[i] * f[j * 2 + k] - c.d[j] * f[i * 2 + k];
    return c;
}

inline double relative_gap(const VectorXd& x, const VectorXd& ref) {
    const double scale = std::max(ref.norm(), 1e-300);
    return (x - ref).norm() / scale;
}

}  // namespace dense_oracle
