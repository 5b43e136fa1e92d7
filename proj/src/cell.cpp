#include "twoscale/cell.hpp"
#include "twoscale/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

namespace twoscale {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    fftw_complex* p;
    explicit FftwBuffer(int n) : p(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!p) throw Error("fftw_malloc failed");
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

double norm_or_one(double v) { return v > 0.0 ? v : 1.0; }

}  // namespace

SpectralGrid::SpectralGrid(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 1 && dim != 2) throw ConfigError("grid dimension must be 1 or 2");
    if (n < 4 || (n & (n - 1)) != 0) throw ConfigError("grid size must be a power of two >= 4");
    size_ = dim == 1 ? n : n * n;
    FftwBuffer in(size_), out(size_);
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (dim == 1) {
        plan_fwd_ = fftw_plan_dft_1d(n, in.p, out.p, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_1d(n, in.p, out.p, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
        plan_fwd_ = fftw_plan_dft_2d(n, n, in.p, out.p, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_2d(n, n, in.p, out.p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!plan_fwd_ || !plan_bwd_) throw Error("FFTW plan creation failed");
}

SpectralGrid::~SpectralGrid() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

std::vector<std::complex<double>> SpectralGrid::forward(const GridField& u) const {
    FftwBuffer in(size_), out(size_);
    for (int i = 0; i < size_; ++i) {
        in.p[i][0] = u[i];
        in.p[i][1] = 0.0;
    }
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), in.p, out.p);
    std::vector<std::complex<double>> c(size_);
    for (int i = 0; i < size_; ++i) c[i] = {out.p[i][0], out.p[i][1]};
    return c;
}

GridField SpectralGrid::backward(const std::vector<std::complex<double>>& c) const {
    FftwBuffer in(size_), out(size_);
    for (int i = 0; i < size_; ++i) {
        in.p[i][0] = c[i].real();
        in.p[i][1] = c[i].imag();
    }
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), in.p, out.p);
    GridField u(size_);
    const double s = 1.0 / size_;
    for (int i = 0; i < size_; ++i) u[i] = out.p[i][0] * s;
    return u;
}

GridField SpectralGrid::derivative(const GridField& u, int axis) const {
    auto c = forward(u);
    const int half = n_ / 2;
    for (int i = 0; i < size_; ++i) {
        const int idx = dim_ == 1 ? i : (axis == 0 ? i / n_ : i % n_);
        const int m = idx == half ? 0 : wavenumber(idx);
        c[i] *= std::complex<double>(0.0, kTwoPi * m);
    }
    return backward(c);
}

GridField SpectralGrid::inverse_neg_laplacian(const GridField& f) const {
    auto c = forward(f);
    const int half = n_ / 2;
    auto sq = [&](int idx) {
        const double m = idx == half ? 0.0 : wavenumber(idx);
        return m * m;
    };
    for (int i = 0; i < size_; ++i) {
        const double s = dim_ == 1 ? sq(i) : sq(i / n_) + sq(i % n_);
        c[i] = s > 0.0 ? c[i] / (kTwoPi * kTwoPi * s) : 0.0;
    }
    return backward(c);
}

void SpectralGrid::project_range(GridField& u) const {
    const int patterns = dim_ == 1 ? 2 : 4;
    GridField sign(size_);
    for (int p = 0; p < patterns; ++p) {
        const int p1 = p & 1, p2 = (p >> 1) & 1;
        for (int i = 0; i < size_; ++i) {
            const int i1 = dim_ == 1 ? i : i / n_;
            const int i2 = dim_ == 1 ? 0 : i % n_;
            sign[i] = ((p1 * i1 + p2 * i2) & 1) ? -1.0 : 1.0;
        }
        u -= (sign.dot(u) / size_) * sign;
    }
}

SampledCoefficient sample_on_grid(const CoefficientField& field, const SpectralGrid& grid) {
    if (field.dim() != grid.dim()) throw Error("grid mismatch: field and grid dimensions differ");
    SampledCoefficient s;
    const int d = grid.dim(), n = grid.n();
    s.a.assign(d == 1 ? 1 : 4, GridField(grid.size()));
    for (int i = 0; i < grid.size(); ++i) {
        const double y1 = grid.coord(d == 1 ? i : i / n);
        const double y2 = d == 1 ? 0.0 : grid.coord(i % n);
        const Tensor2 a = field.sample(y1, y2);
        if (d == 1) {
            s.a[0][i] = a(0, 0);
        } else {
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) s.a[k * 2 + l][i] = a(k, l);
        }
    }
    return s;
}

GridField apply_cell_operator(const SpectralGrid& grid, const SampledCoefficient& a, const GridField& u) {
    const int d = grid.dim();
    if (d == 1) return -grid.derivative(a.at(0, 0).cwiseProduct(grid.derivative(u, 0)), 0);
    const GridField g0 = grid.derivative(u, 0), g1 = grid.derivative(u, 1);
    GridField out = GridField::Zero(grid.size());
    for (int k = 0; k < 2; ++k) {
        const GridField flux = a.at(k, 0).cwiseProduct(g0) + a.at(k, 1).cwiseProduct(g1);
        out -= grid.derivative(flux, k);
    }
    return out;
}

CgResult solve_cell_system(const SpectralGrid& grid, const SampledCoefficient& a, const GridField& rhs,
                           double tol, int max_iter) {
    CgResult res;
    GridField b = rhs;
    grid.project_range(b);
    res.x = GridField::Zero(grid.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) return res;

    double scale = 0.0;
    for (int k = 0; k < grid.dim(); ++k) scale += a.at(k, k).mean();
    scale /= grid.dim();
    auto precond = [&](const GridField& r) { return GridField(grid.inverse_neg_laplacian(r) / scale); };

    // Restarts from the true residual when the recursive one drifts below tol first.
    int it = 0;
    for (int restart = 0; restart < 4 && it < max_iter; ++restart) {
        GridField r = b - apply_cell_operator(grid, a, res.x);
        grid.project_range(r);
        res.residual = r.norm() / bnorm;
        if (res.residual <= tol) break;
        GridField z = precond(r);
        GridField p = z;
        double rz = r.dot(z);
        while (++it <= max_iter) {
            const GridField Ap = apply_cell_operator(grid, a, p);
            const double alpha = rz / p.dot(Ap);
            res.x += alpha * p;
            r -= alpha * Ap;
            grid.project_range(r);
            res.iterations = it;
            if (r.norm() / bnorm <= 0.5 * tol) break;
            z = precond(r);
            const double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
        }
    }
    grid.project_range(res.x);
    GridField true_r = b - apply_cell_operator(grid, a, res.x);
    grid.project_range(true_r);
    res.residual = true_r.norm() / bnorm;
    if (res.residual > tol) throw ConvergenceError("cell CG did not converge", res.residual);
    return res;
}

namespace {

int iteration_cap(const SpectralGrid& grid) { return 10 * grid.n() * grid.dim(); }

// Mean of a right side relative to its size, with unit scale as the floor (coefficients are O(1)).
void require_mean_zero(const GridField& rhs, double tol, const std::string& what) {
    const double m = rhs.mean();
    if (std::abs(m) > tol * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << what << ": right side has mean " << m << " (tolerance " << tol << ")";
        throw Error(os.str());
    }
}

}  // namespace

std::vector<GridField> solve_chi(const CoefficientField& field, const SpectralGrid& grid, double tol,
                                 std::map<std::string, double>* residuals) {
    const auto a = sample_on_grid(field, grid);
    const int d = grid.dim();
    std::vector<GridField> chi;
    for (int j = 0; j < d; ++j) {
        GridField rhs = GridField::Zero(grid.size());
        for (int k = 0; k < d; ++k) rhs += grid.derivative(a.at(k, j), k);
        auto cg = solve_cell_system(grid, a, rhs, tol, iteration_cap(grid));
        if (residuals) (*residuals)["chi[" + std::to_string(j) + "]"] = cg.residual;
        chi.push_back(std::move(cg.x));
    }
    return chi;
}

Tensor2 homogenized_tensor(const CoefficientField& field, const SpectralGrid& grid,
                           const std::vector<GridField>& chi) {
    const int d = grid.dim();
    if (static_cast<int>(chi.size()) != d) throw Error("grid mismatch: corrector count differs from dimension");
    for (const auto& c : chi)
        if (c.size() != grid.size()) throw Error("grid mismatch: corrector sampled on a different grid");
    const auto a = sample_on_grid(field, grid);
    std::vector<GridField> dchi;  // dchi[j*d + k] = D_k chi_j
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) dchi.push_back(grid.derivative(chi[j], k));
    Tensor2 ah = Tensor2::Zero();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            GridField s = a.at(i, j);
            for (int k = 0; k < d; ++k) s += a.at(i, k).cwiseProduct(dchi[j * d + k]);
            ah(i, j) = s.mean();
        }
    return ah;
}

std::vector<GridField> solve_upsilon(const CoefficientField& field, const SpectralGrid& grid,
                                     const std::vector<GridField>& chi, const Tensor2& A_hat, double tol,
                                     std::map<std::string, double>* residuals) {
    const auto a = sample_on_grid(field, grid);
    const int d = grid.dim();
    std::vector<GridField> ups;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            // a_ij + a_ik ∂_k chi_j - â_ij + ∂_k (a_ki chi_j)
            GridField rhs = a.at(i, j).array() - A_hat(i, j);
            for (int k = 0; k < d; ++k) {
                rhs += a.at(i, k).cwiseProduct(grid.derivative(chi[j], k));
                rhs += grid.derivative(a.at(k, i).cwiseProduct(chi[j]), k);
            }
            require_mean_zero(rhs, tol, "solve_upsilon");
            auto cg = solve_cell_system(grid, a, rhs, tol, iteration_cap(grid));
            if (residuals) (*residuals)["upsilon[" + std::to_string(i) + "][" + std::to_string(j) + "]"] = cg.residual;
            ups.push_back(std::move(cg.x));
        }
    return ups;
}

GridField flux_defect(const SampledCoefficient& a, const SpectralGrid& grid, const std::vector<GridField>& chi,
                      const Tensor2& A_hat, int j, int k) {
    GridField g = a.at(j, k).array() - A_hat(j, k);
    for (int l = 0; l < grid.dim(); ++l) g += a.at(j, l).cwiseProduct(grid.derivative(chi[k], l));
    return g;
}

std::vector<GridField> solve_flux_potentials(const CoefficientField& field, const SpectralGrid& grid,
                                             const std::vector<GridField>& chi, const Tensor2& A_hat,
                                             double tol, std::map<std::string, double>* residuals) {
    const auto a = sample_on_grid(field, grid);
    const int d = grid.dim();
    // f[j*d + k] solves Δf_jk = a_jk + a_jl ∂_l chi_k - â_jk.
    std::vector<GridField> f, g;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            g.push_back(flux_defect(a, grid, chi, A_hat, j, k));
            require_mean_zero(g.back(), tol, "solve_flux_potentials");
            f.push_back(-grid.inverse_neg_laplacian(g.back()));
        }
    std::vector<GridField> b(d * d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                if (i == j) {
                    b[(i * d + j) * d + k] = GridField::Zero(grid.size());
                } else if (i < j) {
                    b[(i * d + j) * d + k] = grid.derivative(f[j * d + k], i) - grid.derivative(f[i * d + k], j);
                } else {
                    b[(i * d + j) * d + k] = -b[(j * d + i) * d + k];
                }
            }
    double worst = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            GridField div = -g[j * d + k];
            for (int i = 0; i < d; ++i) div += grid.derivative(b[(i * d + j) * d + k], i);
            worst = std::max(worst, div.cwiseAbs().maxCoeff());
        }
    if (residuals) (*residuals)["b"] = worst;
    return b;
}

GridField solve_poisson_periodic(const SpectralGrid& grid, const GridField& rhs, double tol) {
    if (std::abs(rhs.mean()) > tol) {
        std::ostringstream os;
        os << "solve_poisson_periodic: right side has mean " << rhs.mean();
        throw Error(os.str());
    }
    return grid.inverse_neg_laplacian(rhs);
}

CorrectorSet compute_correctors(const CoefficientField& field, int n, double tol) {
    SpectralGrid grid(field.dim(), n);
    CorrectorSet s;
    s.dim = field.dim();
    s.n = n;
    s.tol = tol;
    s.chi = solve_chi(field, grid, tol, &s.residuals);
    s.A_hat = homogenized_tensor(field, grid, s.chi);
    s.upsilon = solve_upsilon(field, grid, s.chi, s.A_hat, tol, &s.residuals);
    s.b = solve_flux_potentials(field, grid, s.chi, s.A_hat, tol, &s.residuals);
    for (int l = 0; l < s.dim; ++l) {
        s.bigB.push_back(solve_poisson_periodic(grid, s.chi[l], tol));
        GridField r = GridField::Zero(grid.size());
        for (int k = 0; k < s.dim; ++k) r -= grid.derivative(grid.derivative(s.bigB[l], k), k);
        s.residuals["bigB[" + std::to_string(l) + "]"] = (r - s.chi[l]).norm() / norm_or_one(s.chi[l].norm());
    }
    return s;
}

void save_correctors(const CorrectorSet& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write corrector file " + path);
    const char magic[8] = {'T', 'S', 'C', 'O', 'R', 'R', '0', '1'};
    out.write(magic, 8);
    const std::uint32_t count = static_cast<std::uint32_t>(s.chi.size() + s.upsilon.size() + s.b.size() + s.bigB.size());
    const std::uint32_t header[4] = {static_cast<std::uint32_t>(s.dim), static_cast<std::uint32_t>(s.n), count, 0u};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (const auto* group : {&s.chi, &s.upsilon, &s.b, &s.bigB})
        for (const auto& f : *group) out.write(reinterpret_cast<const char*>(f.data()), sizeof(double) * f.size());
    for (int i = 0; i < s.dim; ++i)
        for (int j = 0; j < s.dim; ++j) {
            const double v = s.A_hat(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    if (!out) throw Error("failed writing corrector file " + path);
}

CorrectorSet load_correctors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read corrector file " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "TSCORR01", 8) != 0) throw Error("bad corrector file magic in " + path);
    std::uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    CorrectorSet s;
    s.dim = static_cast<int>(header[0]);
    s.n = static_cast<int>(header[1]);
    const int d = s.dim;
    if ((d != 1 && d != 2) || header[2] != static_cast<std::uint32_t>(d + d * d + d * d * d + d))
        throw Error("corrector file header inconsistent in " + path);
    const int size = d == 1 ? s.n : s.n * s.n;
    auto read_fields = [&](std::vector<GridField>& dst, int count) {
        for (int c = 0; c < count; ++c) {
            GridField f(size);
            in.read(reinterpret_cast<char*>(f.data()), sizeof(double) * size);
            dst.push_back(std::move(f));
        }
    };
    read_fields(s.chi, d);
    read_fields(s.upsilon, d * d);
    read_fields(s.b, d * d * d);
    read_fields(s.bigB, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) in.read(reinterpret_cast<char*>(&s.A_hat(i, j)), sizeof(double));
    if (!in) throw Error("truncated corrector file " + path);
    return s;
}

std::string corrector_cache_name(const CoefficientField& field, int n, double tol) {
    std::ostringstream key;
    key.precision(17);
    key << field.key() << "|N=" << n << "|tol=" << tol;
    // FNV-1a keeps names stable across builds, unlike std::hash.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : key.str()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream name;
    name << "correctors_" << std::hex << h << ".bin";
    return name.str();
}

CorrectorSet load_or_compute_correctors(const CoefficientField& field, int n, double tol,
                                        const std::string& cache_dir) {
    if (cache_dir.empty()) return compute_correctors(field, n, tol);
    const auto path = std::filesystem::path(cache_dir) / corrector_cache_name(field, n, tol);
    if (std::filesystem::exists(path)) {
        CorrectorSet s = load_correctors(path.string());
        s.tol = tol;
        return s;
    }
    std::filesystem::create_directories(cache_dir);
    CorrectorSet s = compute_correctors(field, n, tol);
    save_correctors(s, path.string());
    return s;
}

TrigInterpolant::TrigInterpolant(const SpectralGrid& grid, const GridField& values)
    : dim_(grid.dim()), n_(grid.n()), coef_(grid.forward(values)) {
    for (auto& c : coef_) c /= static_cast<double>(grid.size());
}

void TrigInterpolant::basis(double y, std::vector<std::complex<double>>& e,
                            std::vector<std::complex<double>>* de) const {
    e.resize(n_);
    if (de) de->resize(n_);
    const int half = n_ / 2;
    for (int i = 0; i < n_; ++i) {
        if (i == half) {
            e[i] = std::cos(std::numbers::pi * n_ * y);
            if (de) (*de)[i] = -std::numbers::pi * n_ * std::sin(std::numbers::pi * n_ * y);
            continue;
        }
        const int m = i < half ? i : i - n_;
        e[i] = std::polar(1.0, kTwoPi * m * y);
        if (de) (*de)[i] = std::complex<double>(0.0, kTwoPi * m) * e[i];
    }
}

double TrigInterpolant::value(double y1, double y2) const {
    std::vector<std::complex<double>> e1, e2;
    basis(y1, e1, nullptr);
    if (dim_ == 1) {
        std::complex<double> s = 0.0;
        for (int i = 0; i < n_; ++i) s += coef_[i] * e1[i];
        return s.real();
    }
    basis(y2, e2, nullptr);
    std::complex<double> s = 0.0;
    for (int i = 0; i < n_; ++i) {
        std::complex<double> row = 0.0;
        for (int j = 0; j < n_; ++j) row += coef_[i * n_ + j] * e2[j];
        s += row * e1[i];
    }
    return s.real();
}

Eigen::Vector2d TrigInterpolant::gradient(double y1, double y2) const {
    std::vector<std::complex<double>> e1, e2, d1, d2;
    basis(y1, e1, &d1);
    if (dim_ == 1) {
        std::complex<double> s = 0.0;
        for (int i = 0; i < n_; ++i) s += coef_[i] * d1[i];
        return {s.real(), 0.0};
    }
    basis(y2, e2, &d2);
    std::complex<double> g1 = 0.0, g2 = 0.0;
    for (int i = 0; i < n_; ++i) {
        std::complex<double> row = 0.0, drow = 0.0;
        for (int j = 0; j < n_; ++j) {
            row += coef_[i * n_ + j] * e2[j];
            drow += coef_[i * n_ + j] * d2[j];
        }
        g1 += row * d1[i];
        g2 += drow * e1[i];
    }
    return {g1.real(), g2.real()};
}

}  // namespace twoscale
