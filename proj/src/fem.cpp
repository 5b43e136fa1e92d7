#include "twoscale/fem.hpp"
#include "twoscale/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace twoscale {

namespace {

using Triplet = Eigen::Triplet<double>;

struct GaussLine {
    double x[3];
    double w[3];
};
const GaussLine& gauss3() {
    static const GaussLine g{{0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)},
                             {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
    return g;
}

// Gradients of the three barycentric functions (rows) and twice the signed area.
Eigen::Matrix<double, 3, 2> p1_gradients(const Vec2& a, const Vec2& b, const Vec2& c, double& det) {
    const Vec2 e1 = b - a, e2 = c - a;
    det = e1.x() * e2.y() - e1.y() * e2.x();
    Eigen::Matrix<double, 3, 2> g;
    g(1, 0) = e2.y() / det;
    g(1, 1) = -e2.x() / det;
    g(2, 0) = -e1.y() / det;
    g(2, 1) = e1.x() / det;
    g(0, 0) = -g(1, 0) - g(2, 0);
    g(0, 1) = -g(1, 1) - g(2, 1);
    return g;
}

void finish_system(DiscreteSystem& s) {
    const Mesh& m = *s.mesh;
    const int n = m.num_vertices();
    s.dof_of.assign(n, -1);
    s.free_dofs.clear();
    s.fixed_dofs.clear();
    for (int v = 0; v < n; ++v) {
        if (s.bc == BoundaryCondition::Dirichlet && m.boundary[v]) {
            s.fixed_dofs.push_back(v);
        } else {
            s.dof_of[v] = static_cast<int>(s.free_dofs.size());
            s.free_dofs.push_back(v);
        }
    }
    std::vector<int> bidx(n, -1);
    for (std::size_t i = 0; i < s.fixed_dofs.size(); ++i) bidx[s.fixed_dofs[i]] = static_cast<int>(i);
    std::vector<Triplet> kff, mff, kfb;
    for (int col = 0; col < s.K.outerSize(); ++col)
        for (SpMat::InnerIterator it(s.K, col); it; ++it) {
            const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
            if (s.dof_of[r] < 0) continue;
            if (s.dof_of[c] >= 0)
                kff.emplace_back(s.dof_of[r], s.dof_of[c], it.value());
            else
                kfb.emplace_back(s.dof_of[r], bidx[c], it.value());
        }
    for (int col = 0; col < s.M.outerSize(); ++col)
        for (SpMat::InnerIterator it(s.M, col); it; ++it) {
            const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
            if (s.dof_of[r] >= 0 && s.dof_of[c] >= 0) mff.emplace_back(s.dof_of[r], s.dof_of[c], it.value());
        }
    const int nf = s.num_free(), nb = static_cast<int>(s.fixed_dofs.size());
    s.Kff.resize(nf, nf);
    s.Kff.setFromTriplets(kff.begin(), kff.end());
    s.Mff.resize(nf, nf);
    s.Mff.setFromTriplets(mff.begin(), mff.end());
    s.Kfb.resize(nf, nb);
    s.Kfb.setFromTriplets(kfb.begin(), kfb.end());
}

// Element loop shared by the oscillating and constant-tensor assemblies.
// weighted_tensor(cell) returns ∫_T A dx for triangles (or ∫_I a dx for intervals).
template <class TensorIntegral>
DiscreteSystem assemble_generic(std::shared_ptr<const Mesh> mesh, BoundaryCondition bc, TensorIntegral weighted_tensor) {
    DiscreteSystem s;
    s.mesh = mesh;
    s.bc = bc;
    const Mesh& m = *mesh;
    const int n = m.num_vertices();
    std::vector<Triplet> kt, mt;
    kt.reserve(m.cells.size() * 9);
    mt.reserve(m.cells.size() * 9);
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& t = m.cells[c];
        if (m.dim == 1) {
            const double len = m.points[t[1]].x() - m.points[t[0]].x();
            const double abar = weighted_tensor(c)(0, 0) / (len * len);
            const int v[2] = {t[0], t[1]};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    kt.emplace_back(v[i], v[j], (i == j ? 1.0 : -1.0) * abar);
                    mt.emplace_back(v[i], v[j], len * (i == j ? 2.0 : 1.0) / 6.0);
                }
            continue;
        }
        double det;
        const auto g = p1_gradients(m.points[t[0]], m.points[t[1]], m.points[t[2]], det);
        const Tensor2 abar = weighted_tensor(c);
        const Eigen::Matrix3d ke = g * abar * g.transpose();
        const double area = 0.5 * det;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                kt.emplace_back(t[i], t[j], ke(i, j));
                mt.emplace_back(t[i], t[j], area * (i == j ? 2.0 : 1.0) / 12.0);
            }
    }
    s.K.resize(n, n);
    s.K.setFromTriplets(kt.begin(), kt.end());
    s.M.resize(n, n);
    s.M.setFromTriplets(mt.begin(), mt.end());
    finish_system(s);
    return s;
}

}  // namespace

const TriangleQuadrature& triangle_quadrature(int order) {
    static const TriangleQuadrature q1{{Vec2(1.0 / 3.0, 1.0 / 3.0)}, {0.5}};
    static const TriangleQuadrature q2{{Vec2(1.0 / 6.0, 1.0 / 6.0), Vec2(2.0 / 3.0, 1.0 / 6.0), Vec2(1.0 / 6.0, 2.0 / 3.0)},
                                       {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
    static const TriangleQuadrature q4 = [] {
        TriangleQuadrature q;
        const double a = 0.445948490915965, b = 0.108103018168070;
        const double c = 0.091576213509771, d = 0.816847572980459;
        const double wa = 0.5 * 0.223381589678011, wc = 0.5 * 0.109951743655322;
        q.points = {Vec2(a, a), Vec2(a, b), Vec2(b, a), Vec2(c, c), Vec2(c, d), Vec2(d, c)};
        q.weights = {wa, wa, wa, wc, wc, wc};
        return q;
    }();
    switch (order) {
        case 1: return q1;
        case 2: return q2;
        case 4: return q4;
        default: throw ConfigError("triangle quadrature order must be 1, 2 or 4");
    }
}

Vec DiscreteSystem::restrict_free(const Vec& full) const {
    Vec r(num_free());
    for (int i = 0; i < num_free(); ++i) r[i] = full[free_dofs[i]];
    return r;
}

Vec DiscreteSystem::extend_free(const Vec& free, const Vec* boundary_values) const {
    Vec u = Vec::Zero(mesh->num_vertices());
    for (int i = 0; i < num_free(); ++i) u[free_dofs[i]] = free[i];
    if (boundary_values)
        for (int v : fixed_dofs) u[v] = (*boundary_values)[v];
    return u;
}

double DiscreteSystem::symmetry_defect() const {
    const SpMat d = K - SpMat(K.transpose());
    double kmax = 0.0, dmax = 0.0;
    for (int c = 0; c < K.outerSize(); ++c)
        for (SpMat::InnerIterator it(K, c); it; ++it) kmax = std::max(kmax, std::abs(it.value()));
    for (int c = 0; c < d.outerSize(); ++c)
        for (SpMat::InnerIterator it(d, c); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
    return kmax > 0.0 ? dmax / kmax : dmax;
}

DiscreteSystem assemble(const CoefficientField& field, std::shared_ptr<const Mesh> mesh, double eps,
                        BoundaryCondition bc, int quad_order, int resolution) {
    if (field.dim() != mesh->dim) throw ConfigError("assemble: coefficient and mesh dimensions differ");
    if (!(eps > 0.0)) throw ConfigError("assemble: eps must be positive");
    if (quad_order < 4) throw ConfigError("assemble: oscillating coefficients need quadrature order >= 4");
    const double spacing = mesh->lattice_spacing > 0.0 ? mesh->lattice_spacing : mesh->h;
    const double required = eps / resolution;
    if (spacing > required * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "assemble: mesh spacing " << spacing << " violates the resolution rule for eps = " << eps
           << " (need <= " << required << ")";
        throw ResolutionError(os.str(), required);
    }
    const Mesh& m = *mesh;
    const auto& q = triangle_quadrature(quad_order);
    auto integral = [&](int c) -> Tensor2 {
        const auto& t = m.cells[c];
        if (m.dim == 1) {
            const double x0 = m.points[t[0]].x(), len = m.points[t[1]].x() - x0;
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += gauss3().w[k] * field.sample((x0 + gauss3().x[k] * len) / eps)(0, 0);
            Tensor2 r = Tensor2::Zero();
            r(0, 0) = s * len;
            return r;
        }
        const Vec2& a = m.points[t[0]];
        const Vec2 e1 = m.points[t[1]] - a, e2 = m.points[t[2]] - a;
        const double det = e1.x() * e2.y() - e1.y() * e2.x();
        Tensor2 s = Tensor2::Zero();
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const Vec2 x = a + q.points[k].x() * e1 + q.points[k].y() * e2;
            s += q.weights[k] * field.sample(x.x() / eps, x.y() / eps);
        }
        return s * det;
    };
    DiscreteSystem s = assemble_generic(mesh, bc, integral);
    s.eps = eps;
    s.quad_order = quad_order;
    return s;
}

DiscreteSystem assemble(const Tensor2& A, std::shared_ptr<const Mesh> mesh, BoundaryCondition bc) {
    const Mesh& m = *mesh;
    auto integral = [&](int c) -> Tensor2 {
        const auto& t = m.cells[c];
        if (m.dim == 1) {
            Tensor2 r = Tensor2::Zero();
            r(0, 0) = A(0, 0) * (m.points[t[1]].x() - m.points[t[0]].x());
            return r;
        }
        const Vec2 e1 = m.points[t[1]] - m.points[t[0]], e2 = m.points[t[2]] - m.points[t[0]];
        return A * (0.5 * (e1.x() * e2.y() - e1.y() * e2.x()));
    };
    DiscreteSystem s = assemble_generic(mesh, bc, integral);
    s.eps = 0.0;
    s.quad_order = 1;
    return s;
}

SourceSolver::SourceSolver(const DiscreteSystem& sys) : sys_(&sys) {
    if (sys.bc == BoundaryCondition::Dirichlet) {
        ldlt_.compute(sys.Kff);
    } else {
        // Pin vertex 0 to remove the constant null space.
        pinned_ = 0;
        const int n = sys.K.rows();
        std::vector<Triplet> tr;
        for (int c = 0; c < sys.K.outerSize(); ++c)
            for (SpMat::InnerIterator it(sys.K, c); it; ++it)
                if (it.row() != pinned_ && it.col() != pinned_) tr.emplace_back(it.row() - 1, it.col() - 1, it.value());
        SpMat kp(n - 1, n - 1);
        kp.setFromTriplets(tr.begin(), tr.end());
        ldlt_.compute(kp);
        ones_mass_ = sys.M * Vec::Ones(n);
        total_mass_ = ones_mass_.sum();
    }
    if (ldlt_.info() != Eigen::Success) throw ConvergenceError("SourceSolver: sparse factorization failed", 0.0);
    const Vec d = ldlt_.vectorD();
    if ((d.array() <= 0.0).any()) throw ConvergenceError("SourceSolver: nonpositive pivot in stiffness factorization", d.minCoeff());
}

Vec SourceSolver::solve_load(const Vec& load, const Vec* dirichlet) const {
    const DiscreteSystem& s = *sys_;
    if (s.bc == BoundaryCondition::Dirichlet) {
        Vec rhs = s.restrict_free(load);
        if (dirichlet) {
            Vec gb(s.fixed_dofs.size());
            for (std::size_t i = 0; i < s.fixed_dofs.size(); ++i) gb[i] = (*dirichlet)[s.fixed_dofs[i]];
            rhs -= s.Kfb * gb;
        }
        const Vec uf = ldlt_.solve(rhs);
        return s.extend_free(uf, dirichlet);
    }
    const double l1 = load.cwiseAbs().sum();
    last_defect_ = l1 > 0.0 ? std::abs(load.sum()) / l1 : 0.0;
    Vec f = load - (load.sum() / total_mass_) * ones_mass_;
    if (l1 > 0.0 && std::abs(f.sum()) > 1e-10 * l1)
        throw Error("SourceSolver: Neumann load still has nonzero mean after orthogonalization");
    const int n = static_cast<int>(load.size());
    const Vec up = ldlt_.solve(f.tail(n - 1));
    Vec u(n);
    u[0] = 0.0;
    u.tail(n - 1) = up;
    u.array() -= u.dot(ones_mass_) / total_mass_;
    return u;
}

double SourceSolver::relative_residual(const Vec& u, const Vec& load) const {
    const DiscreteSystem& s = *sys_;
    Vec r = s.K * u - load;
    if (s.bc == BoundaryCondition::Neumann) {
        Vec f = load - (load.sum() / total_mass_) * ones_mass_;
        r = s.K * u - f;
        const double nf = f.norm();
        return nf > 0.0 ? r.norm() / nf : r.norm();
    }
    const Vec rf = s.restrict_free(r), lf = s.restrict_free(load);
    const double scale = std::max(lf.norm(), (s.K * u).norm());
    return scale > 0.0 ? rf.norm() / scale : rf.norm();
}

Vec solve_source(const DiscreteSystem& sys, const Vec& f, const std::function<double(const Vec2&)>& dirichlet) {
    SourceSolver solver(sys);
    if (!dirichlet) return solver.solve_load(sys.M * f);
    Vec g = Vec::Zero(sys.mesh->num_vertices());
    for (int v : sys.fixed_dofs) g[v] = dirichlet(sys.mesh->points[v]);
    return solver.solve_load(sys.M * f, &g);
}

Vec interpolate_two_scale(const Mesh& mesh, const PeriodicFunction& f, double eps) {
    Vec out(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) out[v] = f.value(mesh.points[v] / eps);
    return out;
}

Eigen::MatrixX2d interpolate_two_scale_gradient(const Mesh& mesh, const PeriodicFunction& f, double eps) {
    Eigen::MatrixX2d out(mesh.num_vertices(), 2);
    for (int v = 0; v < mesh.num_vertices(); ++v) out.row(v) = f.gradient(mesh.points[v] / eps).transpose() / eps;
    if (mesh.dim == 1) out.col(1).setZero();
    return out;
}

Eigen::MatrixX2d cell_gradients(const Mesh& mesh, const Vec& u) {
    Eigen::MatrixX2d g(mesh.num_cells(), 2);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cells[c];
        if (mesh.dim == 1) {
            g(c, 0) = (u[t[1]] - u[t[0]]) / (mesh.points[t[1]].x() - mesh.points[t[0]].x());
            g(c, 1) = 0.0;
            continue;
        }
        double det;
        const auto gr = p1_gradients(mesh.points[t[0]], mesh.points[t[1]], mesh.points[t[2]], det);
        g.row(c) = u[t[0]] * gr.row(0) + u[t[1]] * gr.row(1) + u[t[2]] * gr.row(2);
    }
    return g;
}

namespace {

Vec cell_measures(const Mesh& mesh) {
    Vec a(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cells[c];
        if (mesh.dim == 1) {
            a[c] = std::abs(mesh.points[t[1]].x() - mesh.points[t[0]].x());
        } else {
            const Vec2 e1 = mesh.points[t[1]] - mesh.points[t[0]], e2 = mesh.points[t[2]] - mesh.points[t[0]];
            a[c] = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
        }
    }
    return a;
}

template <int Cols>
Eigen::Matrix<double, Eigen::Dynamic, Cols> average_to_vertices(const Mesh& mesh,
                                                                const Eigen::Matrix<double, Eigen::Dynamic, Cols>& cellv) {
    const Vec area = cell_measures(mesh);
    Eigen::Matrix<double, Eigen::Dynamic, Cols> out = Eigen::Matrix<double, Eigen::Dynamic, Cols>::Zero(mesh.num_vertices(), cellv.cols());
    Vec w = Vec::Zero(mesh.num_vertices());
    const int nv = mesh.dim == 1 ? 2 : 3;
    for (int c = 0; c < mesh.num_cells(); ++c)
        for (int i = 0; i < nv; ++i) {
            out.row(mesh.cells[c][i]) += area[c] * cellv.row(c);
            w[mesh.cells[c][i]] += area[c];
        }
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (w[v] > 0.0) out.row(v) /= w[v];
    return out;
}

}  // namespace

Eigen::MatrixX2d recover_gradient(const Mesh& mesh, const Vec& u) {
    return average_to_vertices<2>(mesh, cell_gradients(mesh, u));
}

Eigen::MatrixX3d recover_hessian(const Mesh& mesh, const Vec& u) {
    const Eigen::MatrixX2d g = recover_gradient(mesh, u);
    const Eigen::MatrixX2d gx = cell_gradients(mesh, g.col(0));
    const Eigen::MatrixX2d gy = cell_gradients(mesh, g.col(1));
    Eigen::MatrixX3d h(mesh.num_cells(), 3);
    h.col(0) = gx.col(0);
    h.col(1) = 0.5 * (gx.col(1) + gy.col(0));
    h.col(2) = gy.col(1);
    return average_to_vertices<3>(mesh, h);
}

Vec vertex_areas(const Mesh& mesh) {
    const Vec area = cell_measures(mesh);
    Vec out = Vec::Zero(mesh.num_vertices());
    const int nv = mesh.dim == 1 ? 2 : 3;
    for (int c = 0; c < mesh.num_cells(); ++c)
        for (int i = 0; i < nv; ++i) out[mesh.cells[c][i]] += area[c] / nv;
    return out;
}

PointLocator::PointLocator(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
    const Mesh& m = *mesh_;
    if (m.dim != 2) throw Error("PointLocator supports triangle meshes only");
    lo_ = m.points[0];
    Vec2 hi = m.points[0];
    for (const auto& p : m.points) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = (hi - lo_).maxCoeff();
    const int per_axis = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m.num_cells()) / 2.0)));
    cell_ = span / per_axis * (1.0 + 1e-12);
    nx_ = static_cast<int>((hi.x() - lo_.x()) / cell_) + 1;
    ny_ = static_cast<int>((hi.y() - lo_.y()) / cell_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (int c = 0; c < m.num_cells(); ++c) {
        Vec2 a = m.points[m.cells[c][0]], b = a;
        for (int i = 1; i < 3; ++i) {
            a = a.cwiseMin(m.points[m.cells[c][i]]);
            b = b.cwiseMax(m.points[m.cells[c][i]]);
        }
        const int i0 = static_cast<int>((a.x() - lo_.x()) / cell_), i1 = static_cast<int>((b.x() - lo_.x()) / cell_);
        const int j0 = static_cast<int>((a.y() - lo_.y()) / cell_), j1 = static_cast<int>((b.y() - lo_.y()) / cell_);
        for (int i = i0; i <= std::min(i1, nx_ - 1); ++i)
            for (int j = j0; j <= std::min(j1, ny_ - 1); ++j) buckets_[static_cast<std::size_t>(i) * ny_ + j].push_back(c);
    }
}

bool PointLocator::inside(int c, const Vec2& x, Eigen::Vector3d& bary, double tol) const {
    const auto& t = mesh_->cells[c];
    const Vec2& a = mesh_->points[t[0]];
    const Vec2 e1 = mesh_->points[t[1]] - a, e2 = mesh_->points[t[2]] - a, r = x - a;
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    const double l1 = (r.x() * e2.y() - r.y() * e2.x()) / det;
    const double l2 = (e1.x() * r.y() - e1.y() * r.x()) / det;
    bary = Eigen::Vector3d(1.0 - l1 - l2, l1, l2);
    return bary.minCoeff() >= -tol;
}

std::pair<int, Eigen::Vector3d> PointLocator::locate(const Vec2& x) const {
    const int i = std::clamp(static_cast<int>(std::floor((x.x() - lo_.x()) / cell_)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((x.y() - lo_.y()) / cell_)), 0, ny_ - 1);
    Eigen::Vector3d bary;
    for (int c : buckets_[static_cast<std::size_t>(i) * ny_ + j])
        if (inside(c, x, bary, 1e-12)) return {c, bary};
    // Outside the polygonal domain: project onto the closest triangle edge nearby.
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, Eigen::Vector3d> out{-1, Eigen::Vector3d::Zero()};
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
            for (int c : buckets_[static_cast<std::size_t>(ii) * ny_ + jj]) {
                const auto& t = mesh_->cells[c];
                for (int e = 0; e < 3; ++e) {
                    const Vec2& p = mesh_->points[t[e]];
                    const Vec2 d = mesh_->points[t[(e + 1) % 3]] - p;
                    const double s = std::clamp((x - p).dot(d) / d.squaredNorm(), 0.0, 1.0);
                    const double dist = (p + s * d - x).norm();
                    if (dist < best) {
                        best = dist;
                        Eigen::Vector3d b = Eigen::Vector3d::Zero();
                        b[e] = 1.0 - s;
                        b[(e + 1) % 3] = s;
                        out = {c, b};
                    }
                }
            }
        }
    if (out.first < 0) throw Error("PointLocator: point far outside the mesh");
    return out;
}

double PointLocator::evaluate(const Vec& u, const Vec2& x) const {
    const auto [c, b] = locate(x);
    const auto& t = mesh_->cells[c];
    return b[0] * u[t[0]] + b[1] * u[t[1]] + b[2] * u[t[2]];
}

Vec PointLocator::transfer(const Vec& u, const Mesh& target) const {
    Vec out(target.num_vertices());
    for (int v = 0; v < target.num_vertices(); ++v) out[v] = evaluate(u, target.points[v]);
    return out;
}

}  // namespace twoscale
