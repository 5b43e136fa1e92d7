#include "twoscale/lattice.hpp"
#include "twoscale/error.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>

namespace twoscale {

namespace {

struct LatticeElement {
    std::array<int, 3> node;
    std::array<Vec2, 3> y;
};

// Two triangles per lattice square, same split as the interior of a lattice mesh.
std::vector<LatticeElement> lattice_elements(int n) {
    const double h = 1.0 / n;
    auto id = [n](int i, int j) { return ((i % n + n) % n) * n + ((j % n + n) % n); };
    std::vector<LatticeElement> out;
    out.reserve(2 * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.push_back({{id(i, j), id(i + 1, j), id(i, j + 1)},
                           {Vec2(i * h, j * h), Vec2((i + 1) * h, j * h), Vec2(i * h, (j + 1) * h)}});
            out.push_back({{id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)},
                           {Vec2((i + 1) * h, j * h), Vec2((i + 1) * h, (j + 1) * h), Vec2(i * h, (j + 1) * h)}});
        }
    return out;
}

double det_of(const LatticeElement& e) {
    const Vec2 e1 = e.y[1] - e.y[0], e2 = e.y[2] - e.y[0];
    return e1.x() * e2.y() - e1.y() * e2.x();
}

Eigen::Matrix<double, 3, 2> element_gradients(const LatticeElement& e, double& det) {
    const Vec2 e1 = e.y[1] - e.y[0], e2 = e.y[2] - e.y[0];
    det = e1.x() * e2.y() - e1.y() * e2.x();
    Eigen::Matrix<double, 3, 2> g;
    g(1, 0) = e2.y() / det;
    g(1, 1) = -e2.x() / det;
    g(2, 0) = -e1.y() / det;
    g(2, 1) = e1.x() / det;
    g.row(0) = -g.row(1) - g.row(2);
    return g;
}

// Periodic stiffness with vertex 0 pinned.
class PinnedSolver {
public:
    explicit PinnedSolver(const SpMat& k) : k_(k) {
        const int n = static_cast<int>(k.rows());
        std::vector<Eigen::Triplet<double>> tr;
        for (int c = 0; c < k.outerSize(); ++c)
            for (SpMat::InnerIterator it(k, c); it; ++it)
                if (it.row() > 0 && it.col() > 0) tr.emplace_back(it.row() - 1, it.col() - 1, it.value());
        SpMat kr(n - 1, n - 1);
        kr.setFromTriplets(tr.begin(), tr.end());
        ldlt_.compute(kr);
        if (ldlt_.info() != Eigen::Success) throw ConvergenceError("lattice cell: factorization failed", 0.0);
    }
    // Mean-zero solution and its relative residual.
    Eigen::VectorXd solve(const Eigen::VectorXd& b, double& residual) const {
        const int n = static_cast<int>(b.size());
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        x.tail(n - 1) = ldlt_.solve(b.tail(n - 1));
        x.array() -= x.mean();
        const double nb = b.norm();
        residual = nb > 0.0 ? (k_ * x - b).norm() / nb : (k_ * x).norm();
        return x;
    }

private:
    const SpMat& k_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

double lattice_value(const Eigen::VectorXd& f, int n, const Vec2& y) {
    const double s = (y.x() - std::floor(y.x())) * n, t = (y.y() - std::floor(y.y())) * n;
    int i = static_cast<int>(std::floor(s)), j = static_cast<int>(std::floor(t));
    const double u = s - i, v = t - j;
    auto at = [&](int a, int b) { return f[((a % n + n) % n) * n + ((b % n + n) % n)]; };
    const double f00 = at(i, j), f10 = at(i + 1, j), f01 = at(i, j + 1), f11 = at(i + 1, j + 1);
    if (u + v <= 1.0) return f00 + (f10 - f00) * u + (f01 - f00) * v;
    return f11 + (f11 - f01) * (u - 1.0) + (f11 - f10) * (v - 1.0);
}

Vec2 lattice_gradient(const Eigen::VectorXd& f, int n, const Vec2& y) {
    const double s = (y.x() - std::floor(y.x())) * n, t = (y.y() - std::floor(y.y())) * n;
    int i = static_cast<int>(std::floor(s)), j = static_cast<int>(std::floor(t));
    const double u = s - i, v = t - j;
    auto at = [&](int a, int b) { return f[((a % n + n) % n) * n + ((b % n + n) % n)]; };
    const double f00 = at(i, j), f10 = at(i + 1, j), f01 = at(i, j + 1), f11 = at(i + 1, j + 1);
    if (u + v <= 1.0) return Vec2(f10 - f00, f01 - f00) * n;
    return Vec2(f11 - f01, f11 - f10) * n;
}

PeriodicFunction LatticeCorrectors::chi_function(int j) const {
    const Eigen::VectorXd f = chi.at(j);
    const int m = n;
    return {[f, m](const Vec2& y) { return lattice_value(f, m, y); },
            [f, m](const Vec2& y) { return lattice_gradient(f, m, y); }};
}

PeriodicFunction LatticeCorrectors::upsilon_function(int i, int j) const {
    const Eigen::VectorXd f = upsilon.at(i * 2 + j);
    const int m = n;
    return {[f, m](const Vec2& y) { return lattice_value(f, m, y); },
            [f, m](const Vec2& y) { return lattice_gradient(f, m, y); }};
}

LatticeCorrectors lattice_correctors(const CoefficientField& field, int n, int quad_order) {
    if (field.dim() != 2) throw ConfigError("lattice correctors need a two-dimensional coefficient");
    if (n < 2) throw ConfigError("lattice correctors need n >= 2");
    const auto& q = triangle_quadrature(quad_order);
    const auto elems = lattice_elements(n);
    const int nn = n * n;
    const int nq = static_cast<int>(q.points.size());

    // Per element: quadrature tensors A(y_q)·w_q·det and the integrated tensor.
    std::vector<std::vector<Tensor2>> aq(elems.size());
    std::vector<Eigen::Matrix<double, 3, 2>> grads(elems.size());
    std::vector<Tensor2> abar(elems.size());
    std::vector<Eigen::Triplet<double>> tr;
    Tensor2 amean = Tensor2::Zero();
    for (std::size_t e = 0; e < elems.size(); ++e) {
        double det;
        grads[e] = element_gradients(elems[e], det);
        const Vec2 e1 = elems[e].y[1] - elems[e].y[0], e2 = elems[e].y[2] - elems[e].y[0];
        abar[e].setZero();
        for (int k = 0; k < nq; ++k) {
            const Vec2 y = elems[e].y[0] + q.points[k].x() * e1 + q.points[k].y() * e2;
            aq[e].push_back(q.weights[k] * det * field.sample(y.x(), y.y()));
            abar[e] += aq[e].back();
        }
        amean += abar[e];
        const Eigen::Matrix3d ke = grads[e] * abar[e] * grads[e].transpose();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) tr.emplace_back(elems[e].node[r], elems[e].node[c], ke(r, c));
    }
    SpMat k(nn, nn);
    k.setFromTriplets(tr.begin(), tr.end());
    PinnedSolver solver(k);

    LatticeCorrectors out;
    out.n = n;
    // chi_j: ∫ A∇chi_j·∇v = -∫ A e_j·∇v.
    std::array<Eigen::VectorXd, 2> load;
    for (int j = 0; j < 2; ++j) {
        load[j] = Eigen::VectorXd::Zero(nn);
        for (std::size_t e = 0; e < elems.size(); ++e) {
            const Eigen::Vector3d le = grads[e] * abar[e].col(j);
            for (int r = 0; r < 3; ++r) load[j][elems[e].node[r]] -= le[r];
        }
        double res;
        out.chi.push_back(solver.solve(load[j], res));
        out.chi_residual = std::max(out.chi_residual, res);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.A_hat(i, j) = amean(i, j) - load[i].dot(out.chi[j]);

    // Second-order correctors are fixed by the discrete equation itself: for a quadratic P the
    // nodal function W = P + chi_k ∂_k P + Υ:∇²P must satisfy K W = -(Â_h:∇²P) M 1 on the lattice.
    // The residual of P + chi_k ∂_k P is translation invariant (the chi equation holds exactly),
    // so each row is evaluated in the frame of its own node. Cases: P = y1²/2, y1 y2, y2²/2.
    std::array<Eigen::VectorXd, 3> rhs;
    for (auto& r : rhs) r = Eigen::VectorXd::Zero(nn);
    const std::array<double, 3> contraction{out.A_hat(0, 0), out.A_hat(0, 1) + out.A_hat(1, 0), out.A_hat(1, 1)};
    for (std::size_t e = 0; e < elems.size(); ++e) {
        const auto& el = elems[e];
        const Eigen::Matrix3d ke = grads[e] * abar[e] * grads[e].transpose();
        const double row_mass = std::abs(det_of(el)) / 6.0;
        for (int a = 0; a < 3; ++a) {
            const int na = el.node[a];
            const Vec2 za(static_cast<double>(na / n) / n, static_cast<double>(na % n) / n);
            for (int b = 0; b < 3; ++b) {
                const Vec2 y = za + (el.y[b] - el.y[a]);
                const double c1 = out.chi[0][el.node[b]], c2 = out.chi[1][el.node[b]];
                const std::array<double, 3> w{0.5 * y.x() * y.x() + c1 * y.x(), y.x() * y.y() + c1 * y.y() + c2 * y.x(),
                                              0.5 * y.y() * y.y() + c2 * y.y()};
                for (int c = 0; c < 3; ++c) rhs[c][na] -= ke(a, b) * w[c];
            }
            for (int c = 0; c < 3; ++c) rhs[c][na] -= contraction[c] * row_mass;
        }
    }
    std::array<Eigen::VectorXd, 3> sol;
    for (int c = 0; c < 3; ++c) {
        const double l1 = rhs[c].cwiseAbs().sum();
        out.upsilon_rhs_mean = std::max(out.upsilon_rhs_mean, l1 > 0.0 ? std::abs(rhs[c].sum()) / l1 : 0.0);
        double res;
        sol[c] = solver.solve(rhs[c], res);
        out.upsilon_residual = std::max(out.upsilon_residual, res);
    }
    // Only the symmetric part of Υ is determined; the mixed case is split evenly.
    out.upsilon = {sol[0], 0.5 * sol[1], 0.5 * sol[1], sol[2]};
    return out;
}

}  // namespace twoscale
