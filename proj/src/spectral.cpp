#include "twoscale/spectral.hpp"
#include "twoscale/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace twoscale {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) x(r, c) = g(rng);
    return x;
}

// Number of negative pivots of K - σM, i.e. eigenvalues below σ.
int inertia_below(const SpMat& k, const SpMat& m, double sigma) {
    if (sigma <= 0.0) return 0;
    Ldlt f(SpMat(k - sigma * m));
    if (f.info() != Eigen::Success) throw ConvergenceError("inertia: factorization failed", sigma);
    return static_cast<int>((f.vectorD().array() < 0.0).count());
}

// Twice-repeated modified Gram-Schmidt in the mass inner product.
void mass_orthonormalize(Eigen::MatrixXd& x, const SpMat& m, const Vec* deflate) {
    for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < x.cols(); ++c) {
            if (deflate) x.col(c) -= deflate->dot(m * x.col(c)) * *deflate;
            for (int p = 0; p < c; ++p) x.col(c) -= x.col(p).dot(m * x.col(c)) * x.col(p);
            const double nrm = std::sqrt(std::max(0.0, x.col(c).dot(m * x.col(c))));
            if (nrm == 0.0) throw ConvergenceError("eigen_cluster: subspace collapsed", 0.0);
            x.col(c) /= nrm;
        }
    }
}

}  // namespace

EigenCluster eigen_cluster(const DiscreteSystem& sys, double target, int M_expected, const EigenOptions& opt) {
    if (!(target > 0.0)) throw ConfigError("eigen_cluster: target must be positive");
    if (M_expected < 1) throw ConfigError("eigen_cluster: expected multiplicity must be >= 1");
    const SpMat& k = sys.Kff;
    const SpMat& m = sys.Mff;
    const int n = sys.num_free();
    const int p = std::min(n - 1, M_expected + opt.extra_vectors);
    if (p < M_expected) throw ConfigError("eigen_cluster: system too small for the requested cluster");

    EigenCluster out;
    out.bc = sys.bc;
    out.target = target;
    out.window = opt.window_fraction * target;
    out.multiplicity = M_expected;

    // Neumann: work on the mass-orthogonal complement of constants.
    Vec ones;
    const Vec* deflate = nullptr;
    if (sys.bc == BoundaryCondition::Neumann) {
        ones = Vec::Ones(n);
        ones /= std::sqrt(ones.dot(m * ones));
        deflate = &ones;
    }

    double sigma = target;
    Ldlt f;
    for (int attempt = 0;; ++attempt) {
        f.compute(SpMat(k - sigma * m));
        const bool ok = f.info() == Eigen::Success &&
                        f.vectorD().cwiseAbs().minCoeff() > 1e-14 * f.vectorD().cwiseAbs().maxCoeff();
        if (ok) break;
        if (attempt >= 5) throw ConvergenceError("eigen_cluster: shifted factorization singular", sigma);
        sigma *= 1.0 + 1e-6 * (attempt + 1);
    }

    Eigen::MatrixXd x = gaussian_matrix(n, p, opt.seed);
    mass_orthonormalize(x, m, deflate);
    std::vector<int> order(p);
    Eigen::VectorXd ritz;
    double worst = 0.0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        Eigen::MatrixXd y(n, p);
        const Eigen::MatrixXd mx = m * x;
        for (int c = 0; c < p; ++c) y.col(c) = f.solve(mx.col(c));
        mass_orthonormalize(y, m, deflate);
        const Eigen::MatrixXd ky = k * y;
        Eigen::MatrixXd small = y.transpose() * ky;
        small = 0.5 * (small + small.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
        ritz = es.eigenvalues();
        x = y * es.eigenvectors();
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return std::abs(ritz[a] - sigma) < std::abs(ritz[b] - sigma); });
        worst = 0.0;
        for (int j = 0; j < M_expected; ++j) {
            const int c = order[j];
            const Vec mv = m * x.col(c);
            worst = std::max(worst, (k * x.col(c) - ritz[c] * mv).norm() / (std::abs(ritz[c]) * mv.norm()));
        }
        if (worst <= opt.tol) break;
    }
    out.iterations = it + 1;
    if (worst > opt.accept_tol) throw ConvergenceError("eigen_cluster: subspace iteration did not converge", worst);

    std::vector<int> chosen(order.begin(), order.begin() + M_expected);
    std::sort(chosen.begin(), chosen.end(), [&](int a, int b) { return ritz[a] < ritz[b]; });
    out.vectors.resize(sys.mesh->num_vertices(), M_expected);
    for (int j = 0; j < M_expected; ++j) {
        const int c = chosen[j];
        out.values.push_back(ritz[c]);
        out.vectors.col(j) = sys.extend_free(x.col(c));
        const Vec mv = m * x.col(c);
        out.residuals.push_back((k * x.col(c) - ritz[c] * mv).norm() / (std::abs(ritz[c]) * mv.norm()));
    }
    const Eigen::MatrixXd gram = out.vectors.transpose() * (sys.M * out.vectors);
    out.orthonormality_defect = (gram - Eigen::MatrixXd::Identity(M_expected, M_expected)).cwiseAbs().maxCoeff();

    const double lo = target - 1.5 * out.window, hi = target + 1.5 * out.window;
    int count = inertia_below(k, m, hi) - inertia_below(k, m, lo);
    // The Neumann constant mode sits at 0 and is not part of any cluster.
    if (sys.bc == BoundaryCondition::Neumann && lo < 0.0) count -= 1;
    out.count_in_certificate = count;
    bool inside = true;
    for (double v : out.values) inside = inside && std::abs(v - target) <= out.window;
    if (count != M_expected || !inside) {
        std::ostringstream os;
        os << "eigen_cluster: expected " << M_expected << " eigenvalues near " << target << ", certificate counts "
           << count << " in [" << lo << ", " << hi << "]; found";
        for (double v : out.values) os << ' ' << v;
        throw ClusterError(os.str());
    }
    return out;
}

ClusterMean cluster_mean(const std::vector<double>& values) {
    if (values.empty()) throw Error("cluster_mean: empty cluster");
    ClusterMean r;
    for (double v : values) {
        r.lambda_bar += v;
        r.mu_bar += 1.0 / v;
    }
    r.lambda_bar /= values.size();
    r.mu_bar /= values.size();
    return r;
}

ProjectionPair make_projection_pair(const SpMat& mass, const EigenCluster& c0, const EigenCluster& ceps) {
    if (c0.vectors.rows() != ceps.vectors.rows() || c0.vectors.rows() != mass.rows())
        throw Error("make_projection_pair: clusters live on different meshes");
    if (c0.vectors.cols() != ceps.vectors.cols()) throw Error("make_projection_pair: cluster sizes differ");
    ProjectionPair p;
    p.mass = &mass;
    p.basis0 = c0.vectors;
    p.values0 = c0.values;
    p.values_eps = ceps.values;
    // Rotation R minimizing ‖B0 - Bε R‖_M: with G = Bεᵀ M B0 = U Σ Vᵀ, R = U Vᵀ.
    const Eigen::MatrixXd g = ceps.vectors.transpose() * (mass * c0.vectors);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p.alignment = svd.matrixU() * svd.matrixV().transpose();
    p.basis_eps = ceps.vectors * p.alignment;
    return p;
}

Vec project_onto(const SpMat& mass, const Eigen::MatrixXd& basis, const Vec& f) {
    if (f.size() != basis.rows()) throw Error("project: field and basis sizes differ");
    return basis * (basis.transpose() * (mass * f));
}

Vec project(const ProjectionPair& pair, Projector which, const Vec& f) {
    return project_onto(*pair.mass, which == Projector::S0 ? pair.basis0 : pair.basis_eps, f);
}

ProjectionChecks check_projection(const DiscreteSystem& sys, const EigenCluster& cluster, int samples,
                                  std::uint64_t seed) {
    const SpMat& m = sys.M;
    const Eigen::MatrixXd& b = cluster.vectors;
    const int n = static_cast<int>(b.rows());
    const int mm = static_cast<int>(b.cols());
    ProjectionChecks out;
    out.orthonormality = (b.transpose() * (m * b) - Eigen::MatrixXd::Identity(mm, mm)).cwiseAbs().maxCoeff();

    // Random fields vanish on Dirichlet nodes so they belong to the discrete space.
    Eigen::MatrixXd r = gaussian_matrix(n, 2 * samples, seed);
    if (sys.bc == BoundaryCondition::Dirichlet)
        for (int v : sys.fixed_dofs) r.row(v).setZero();
    auto mnorm = [&](const Vec& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); };
    Eigen::MatrixXd images(n, samples);
    for (int s = 0; s < samples; ++s) {
        const Vec f = r.col(s), g = r.col(samples + s);
        const Vec sf = project_onto(m, b, f), sg = project_onto(m, b, g);
        images.col(s) = sf;
        out.idempotence = std::max(out.idempotence, mnorm(project_onto(m, b, sf) - sf) / mnorm(f));
        out.self_adjointness =
            std::max(out.self_adjointness, std::abs(sf.dot(m * g) - f.dot(m * sg)) / (mnorm(f) * mnorm(g)));
    }
    // Rank from the mass Gram matrix of the images.
    const Eigen::MatrixXd gram = images.transpose() * (m * images);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] > 1e-10 * top) ++out.rank;

    // Resolvent identity with z = μ0 + 1, μ0 the mean reciprocal of the cluster.
    const double mu0 = cluster_mean(cluster.values).mu_bar;
    const double z = mu0 + 1.0;
    Ldlt f(SpMat(z * sys.Kff - sys.Mff));
    if (f.info() != Eigen::Success) throw ConvergenceError("resolvent: factorization failed", z);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gd(0.0, 1.0);
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd c(mm);
        for (int j = 0; j < mm; ++j) c[j] = gd(rng);
        const Vec g = b * c;
        Vec expect = Vec::Zero(n);
        for (int j = 0; j < mm; ++j) expect += c[j] / (z - 1.0 / cluster.values[j]) * b.col(j);
        const Vec gf = sys.restrict_free(g);
        const Vec u = sys.extend_free(f.solve(Vec(sys.Kff * gf)));
        out.resolvent = std::max(out.resolvent, mnorm(u - expect) / mnorm(g));
    }
    return out;
}

double theta_from_pairing(const SpMat& mass, const Eigen::MatrixXd& kbl_phi, const Eigen::MatrixXd& phis,
                          double lambda0) {
    if (kbl_phi.cols() != phis.cols() || kbl_phi.rows() != phis.rows())
        throw Error("theta_from_pairing: dimension mismatch");
    double s = 0.0;
    for (int j = 0; j < phis.cols(); ++j) s += kbl_phi.col(j).dot(mass * phis.col(j));
    return -lambda0 / static_cast<double>(phis.cols()) * s;
}

Eigen::MatrixXd random_rotation(int m, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(m, m, seed));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
    return q;
}

OsbornResult osborn_diagnostic(const SourceSolver& t_eps, const SourceSolver& t0, const SpMat& mass,
                               const Eigen::MatrixXd& basis0, double mu0, const std::vector<double>& values_eps) {
    OsbornResult r;
    r.mu0 = mu0;
    r.mu_bar_eps = cluster_mean(values_eps).mu_bar;
    double s = 0.0;
    for (int j = 0; j < basis0.cols(); ++j) {
        const Vec phi = basis0.col(j);
        const Vec d = t_eps.apply_T(phi) - t0.apply_T(phi);
        s += d.dot(mass * phi);
    }
    r.pairing = s / static_cast<double>(basis0.cols());
    r.defect = std::abs(r.mu_bar_eps - r.mu0 - r.pairing);
    return r;
}

PsiBlSolver::PsiBlSolver(const DiscreteSystem& sys0, const Eigen::MatrixXd& basis0, double lambda0)
    : sys_(&sys0), basis_(basis0), lambda0_(lambda0) {
    if (sys0.bc != BoundaryCondition::Dirichlet) throw ConfigError("psi_bl_solve needs a Dirichlet system");
    const int nf = sys0.num_free();
    const int mm = static_cast<int>(basis0.cols());
    const SpMat a = sys0.Kff - lambda0 * sys0.Mff;
    std::vector<Eigen::Triplet<double>> tr;
    tr.reserve(a.nonZeros() + 2 * nf * mm);
    for (int c = 0; c < a.outerSize(); ++c)
        for (SpMat::InnerIterator it(a, c); it; ++it) tr.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < mm; ++j) {
        const Vec c = sys0.restrict_free(sys0.M * basis0.col(j));
        for (int i = 0; i < nf; ++i) {
            if (c[i] == 0.0) continue;
            tr.emplace_back(i, nf + j, c[i]);
            tr.emplace_back(nf + j, i, c[i]);
        }
    }
    bordered_.resize(nf + mm, nf + mm);
    bordered_.setFromTriplets(tr.begin(), tr.end());
    bordered_.makeCompressed();
    lu_.compute(bordered_);
    if (lu_.info() != Eigen::Success)
        throw ConvergenceError("psi_bl_solve: bordered factorization singular (" + lu_.lastErrorMessage() + ")", 0.0);
}

PsiBlResult PsiBlSolver::solve(const Vec& kbl) const {
    const DiscreteSystem& s = *sys_;
    const int nf = s.num_free();
    const int mm = static_cast<int>(basis_.cols());
    PsiBlResult r;
    const Vec w = kbl - project_onto(s.M, basis_, kbl);
    Vec rhs = Vec::Zero(nf + mm);
    rhs.head(nf) = lambda0_ * s.restrict_free(s.M * w);
    const Vec sol = lu_.solve(rhs);
    const double rn = rhs.norm();
    r.bordered_residual = rn > 0.0 ? (bordered_ * sol - rhs).norm() / rn : (bordered_ * sol).norm();
    r.multipliers = sol.tail(mm);
    r.psi = w + s.extend_free(sol.head(nf));

    const double pn = s.mass_norm(r.psi);
    for (int j = 0; j < mm; ++j)
        r.orthogonality_defect =
            std::max(r.orthogonality_defect, pn > 0.0 ? std::abs(r.psi.dot(s.M * basis_.col(j))) / pn : 0.0);
    for (int v : s.fixed_dofs) r.boundary_defect = std::max(r.boundary_defect, std::abs(r.psi[v] - kbl[v]));

    const Vec k0k = s.restrict_free(s.K * kbl);
    double knorm = 0.0;
    for (int c = 0; c < s.K.outerSize(); ++c) {
        double col = 0.0;
        for (SpMat::InnerIterator it(s.K, c); it; ++it) col += std::abs(it.value());
        knorm = std::max(knorm, col);
    }
    const double kinf = kbl.cwiseAbs().maxCoeff();
    r.harmonic_defect = kinf > 0.0 ? k0k.cwiseAbs().maxCoeff() / (knorm * kinf) : 0.0;

    const Vec lhs = s.restrict_free(s.K * r.psi - lambda0_ * (s.M * r.psi));
    const Vec target = s.restrict_free(s.K * w) + s.restrict_free(s.M * basis_) * r.multipliers * -1.0;
    const double tn = std::max(target.norm(), lhs.norm());
    r.pde_residual = tn > 0.0 ? (lhs - target).norm() / tn : 0.0;
    return r;
}

}  // namespace twoscale
