#include "twoscale/layers.hpp"
#include "twoscale/error.hpp"
#include "twoscale/rate_fit.hpp"

#include <cmath>
#include <complex>

namespace twoscale {

namespace {

LayerSolve solve_layer(const SourceSolver& solver, const DiscreteSystem& sys, double eps, Vec data) {
    if (sys.bc != BoundaryCondition::Dirichlet) throw ConfigError("layer solves need a Dirichlet system");
    LayerSolve out;
    out.eps = eps;
    const Vec zero = Vec::Zero(sys.mesh->num_vertices());
    out.v = solver.solve_load(zero, &data);
    out.residual = solver.relative_residual(out.v, zero);
    for (int v : sys.fixed_dofs) out.boundary_defect = std::max(out.boundary_defect, std::abs(out.v[v] - data[v]));
    out.boundary_data = std::move(data);
    return out;
}

}  // namespace

LayerSolve v1_eps(const SourceSolver& solver, const DiscreteSystem& sys, const std::vector<PeriodicFunction>& chi,
                  double eps, const Eigen::MatrixX2d& grad_u0) {
    const Mesh& m = *sys.mesh;
    Vec data = Vec::Zero(m.num_vertices());
    for (int v : sys.fixed_dofs) {
        const Vec2 y = m.points[v] / eps;
        for (std::size_t j = 0; j < chi.size(); ++j) data[v] -= chi[j].value(y) * grad_u0(v, j);
    }
    return solve_layer(solver, sys, eps, std::move(data));
}

LayerSolve v2_eps(const SourceSolver& solver, const DiscreteSystem& sys,
                  const std::vector<PeriodicFunction>& upsilon, double eps, const Eigen::MatrixX3d& hess_u0) {
    const Mesh& m = *sys.mesh;
    if (upsilon.size() != 4) throw ConfigError("v2_eps expects four second-order correctors");
    Vec data = Vec::Zero(m.num_vertices());
    for (int v : sys.fixed_dofs) {
        const Vec2 y = m.points[v] / eps;
        data[v] = -(upsilon[0].value(y) * hess_u0(v, 0) + (upsilon[1].value(y) + upsilon[2].value(y)) * hess_u0(v, 1) +
                    upsilon[3].value(y) * hess_u0(v, 2));
    }
    return solve_layer(solver, sys, eps, std::move(data));
}

Vec harmonic_fit(const Mesh& mesh, const Vec& v, const Tensor2& a_hat, int degree, double interior, double* misfit) {
    if (mesh.dim != 2) throw ConfigError("harmonic_fit needs a two-dimensional mesh");
    if (degree < 0) throw ConfigError("harmonic_fit: degree must be >= 0");
    // u(x) = h(T x) with T = Â^{-1/2} and h harmonic satisfies div(Â ∇u) = 0.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a_hat.topLeftCorner<2, 2>());
    if (es.eigenvalues().minCoeff() <= 0.0) throw ConfigError("harmonic_fit: Â must be positive definite");
    const Eigen::Matrix2d t = es.operatorInverseSqrt();
    const int nv = mesh.num_vertices();
    double scale = 0.0;
    for (const auto& p : mesh.points) scale = std::max(scale, (t * p).norm());
    const int nb = 2 * degree + 1;
    Eigen::MatrixXd basis(nv, nb);
    for (int i = 0; i < nv; ++i) {
        const Vec2 z = t * mesh.points[i] / scale;
        const std::complex<double> zc(z.x(), z.y());
        std::complex<double> pw(1.0, 0.0);
        basis(i, 0) = 1.0;
        for (int k = 1; k <= degree; ++k) {
            pw *= zc;
            basis(i, 2 * k - 1) = pw.real();
            basis(i, 2 * k) = pw.imag();
        }
    }
    const Vec area = vertex_areas(mesh);
    std::vector<int> rows;
    for (int i = 0; i < nv; ++i)
        if (mesh.domain.distance(mesh.points[i]) >= interior) rows.push_back(i);
    if (static_cast<int>(rows.size()) < 4 * nb) throw ConfigError("harmonic_fit: too few interior vertices");
    Eigen::MatrixXd a(rows.size(), nb);
    Eigen::VectorXd b(rows.size());
    double wsum = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double w = std::sqrt(area[rows[r]]);
        a.row(r) = w * basis.row(rows[r]);
        b[r] = w * v[rows[r]];
        wsum += area[rows[r]];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    if (misfit) *misfit = std::sqrt((a * c - b).squaredNorm() / wsum);
    return basis * c;
}

KblEstimate estimate_Kbl(const std::vector<LadderLevel>& ladder, const SpMat& mass, const KblOptions& opt) {
    if (ladder.size() < 2) throw ConfigError("estimate_Kbl: the ladder needs at least two levels");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i].eps < ladder[i - 1].eps)) throw ConfigError("estimate_Kbl: ladder must be strictly decreasing");
    KblEstimate out;
    out.mesh = ladder.back().mesh;
    const Mesh& fine = *out.mesh;
    std::vector<Vec> on_fine;
    for (const auto& level : ladder) {
        out.eps.push_back(level.eps);
        if (level.mesh == out.mesh) {
            on_fine.push_back(level.v);
        } else {
            PointLocator loc(level.mesh);
            on_fine.push_back(loc.transfer(level.v, fine));
        }
        out.norms.push_back(std::sqrt(std::max(0.0, on_fine.back().dot(mass * on_fine.back()))));
    }
    for (std::size_t i = 0; i + 1 < on_fine.size(); ++i) {
        const Vec d = on_fine[i] - on_fine[i + 1];
        out.differences.push_back(std::sqrt(std::max(0.0, d.dot(mass * d))));
    }
    out.estimate = on_fine.back();
    out.previous = on_fine[on_fine.size() - 2];
    out.error_bound = out.differences.back();
    if (opt.method == KblOptions::Method::Harmonic) {
        std::vector<Vec> fits;
        for (const Vec& v : on_fine) {
            double mis = 0.0;
            fits.push_back(harmonic_fit(fine, v, opt.a_hat, opt.degree, opt.interior, &mis));
            out.fit_misfit.push_back(mis);
        }
        for (std::size_t i = 0; i + 1 < fits.size(); ++i) {
            const Vec d = fits[i] - fits[i + 1];
            out.fitted_differences.push_back(std::sqrt(std::max(0.0, d.dot(mass * d))));
        }
        out.estimate = fits.back();
        out.previous = fits[fits.size() - 2];
        out.error_bound = out.fitted_differences.back();
    }
    const std::vector<double> e(out.eps.begin(), out.eps.end() - 1);
    if (out.differences.size() >= 3) {
        out.slope = rate_fit(e, out.differences).slope;
    } else if (out.differences.size() == 2) {
        out.slope = two_point_slope(e[0], out.differences[0], e[1], out.differences[1]);
    }
    for (std::size_t i = 1; i < out.differences.size(); ++i)
        if (!(out.differences[i] < out.differences[i - 1])) out.homogenization_observed = false;
    return out;
}

NeumannData neumann_data(const CorrectorSet& correctors, const Mesh& mesh, double eps,
                         const Eigen::MatrixX2d& grad_u0, double tol) {
    if (correctors.dim != 2 || mesh.dim != 2) throw ConfigError("neumann_data needs two-dimensional inputs");
    SpectralGrid grid(2, correctors.n);
    const TrigInterpolant b1(grid, correctors.b_at(0, 1, 0));
    const TrigInterpolant b2(grid, correctors.b_at(0, 1, 1));
    NeumannData out;
    out.potential = Vec::Zero(mesh.num_vertices());
    out.load = Vec::Zero(mesh.num_vertices());
    std::vector<char> seen(mesh.num_vertices(), 0);
    for (const auto& e : mesh.boundary_edges)
        for (int v : e) {
            if (seen[v]) continue;
            seen[v] = 1;
            const Vec2 y = mesh.points[v] / eps;
            out.potential[v] = b1.value(y.x(), y.y()) * grad_u0(v, 0) + b2.value(y.x(), y.y()) * grad_u0(v, 1);
        }
    // g = dF/ds is constant on each edge for the P1 interpolant of F; each endpoint receives half the jump.
    double integral = 0.0, l2sq = 0.0;
    for (const auto& e : mesh.boundary_edges) {
        const double jump = out.potential[e[1]] - out.potential[e[0]];
        const double len = (mesh.points[e[1]] - mesh.points[e[0]]).norm();
        out.load[e[0]] += 0.5 * jump;
        out.load[e[1]] += 0.5 * jump;
        integral += jump;
        l2sq += jump * jump / len;
    }
    out.l2_norm = std::sqrt(l2sq);
    out.compatibility = std::abs(integral);
    if (out.compatibility > tol)
        throw Error("neumann_data: compatibility integral " + std::to_string(out.compatibility) + " exceeds tolerance");
    return out;
}

NeumannLayer neumann_layer(const SourceSolver& solver, const NeumannData& data) {
    NeumannLayer out;
    out.v = solver.solve_load(data.load);
    out.compatibility_defect = solver.last_compatibility_defect();
    out.residual = solver.relative_residual(out.v, data.load);
    return out;
}

}  // namespace twoscale
