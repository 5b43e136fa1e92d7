#pragma once

#include "twoscale/coeff.hpp"

#include <Eigen/Dense>

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace twoscale {

// Values of a periodic field at y = (i1/N, i2/N), row-major with i1 slowest.
using GridField = Eigen::VectorXd;

// Fourier-collocation operators on the uniform N^d grid of the unit torus.
// The first-derivative symbol is 2πi·m with the Nyquist wavenumber set to zero, so
// the discrete operators annihilate the constant and the Nyquist sign patterns
// (2 null vectors in d = 1, 4 in d = 2). All solves work on the complement of that null space.
class SpectralGrid {
public:
    SpectralGrid(int dim, int n);
    ~SpectralGrid();
    SpectralGrid(const SpectralGrid&) = delete;
    SpectralGrid& operator=(const SpectralGrid&) = delete;

    int dim() const { return dim_; }
    int n() const { return n_; }
    int size() const { return size_; }
    double coord(int i) const { return static_cast<double>(i) / n_; }

    GridField derivative(const GridField& u, int axis) const;
    // Pseudo-inverse of -Σ D_k D_k; zero on the null modes.
    GridField inverse_neg_laplacian(const GridField& f) const;
    // Removes the components along the null modes (mean and Nyquist patterns).
    void project_range(GridField& u) const;
    double mean(const GridField& u) const { return u.mean(); }

    std::vector<std::complex<double>> forward(const GridField& u) const;
    GridField backward(const std::vector<std::complex<double>>& c) const;

    // Wavenumber of index i along an axis; Nyquist reported as n/2.
    int wavenumber(int i) const { return i <= n_ / 2 ? i : i - n_; }

private:
    int dim_, n_, size_;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
};

// Samples A(y) on the grid; entries a[k*2+l] hold a_kl (2D) or a[0] (1D).
struct SampledCoefficient {
    std::vector<GridField> a;
    const GridField& at(int k, int l) const { return a[k * 2 + l]; }
};
SampledCoefficient sample_on_grid(const CoefficientField& field, const SpectralGrid& grid);

// u -> -div(A ∇u) in collocation form: -Σ_k D_k (a_kl D_l u).
GridField apply_cell_operator(const SpectralGrid& grid, const SampledCoefficient& a, const GridField& u);

struct CgResult {
    GridField x;
    double residual = 0.0;  // relative residual ‖b - Lx‖ / ‖b‖
    int iterations = 0;
};

// Preconditioned CG for the cell operator on the range of the null-mode projector.
CgResult solve_cell_system(const SpectralGrid& grid, const SampledCoefficient& a, const GridField& rhs,
                           double tol, int max_iter);

struct CorrectorSet {
    int dim = 0;
    int n = 0;
    double tol = 0.0;
    std::vector<GridField> chi;      // chi[j]
    std::vector<GridField> upsilon;  // upsilon[i*d + j]
    std::vector<GridField> b;        // b[(i*d + j)*d + k]
    std::vector<GridField> bigB;     // bigB[l], -ΔB_l = chi_l
    Tensor2 A_hat = Tensor2::Zero();
    std::map<std::string, double> residuals;

    const GridField& chi_at(int j) const { return chi[j]; }
    const GridField& upsilon_at(int i, int j) const { return upsilon[i * dim + j]; }
    const GridField& b_at(int i, int j, int k) const { return b[(i * dim + j) * dim + k]; }
};

std::vector<GridField> solve_chi(const CoefficientField& field, const SpectralGrid& grid, double tol,
                                 std::map<std::string, double>* residuals = nullptr);
Tensor2 homogenized_tensor(const CoefficientField& field, const SpectralGrid& grid,
                           const std::vector<GridField>& chi);
std::vector<GridField> solve_upsilon(const CoefficientField& field, const SpectralGrid& grid,
                                     const std::vector<GridField>& chi, const Tensor2& A_hat, double tol,
                                     std::map<std::string, double>* residuals = nullptr);
std::vector<GridField> solve_flux_potentials(const CoefficientField& field, const SpectralGrid& grid,
                                             const std::vector<GridField>& chi, const Tensor2& A_hat,
                                             double tol, std::map<std::string, double>* residuals = nullptr);
// Mean-zero potential with -ΔB = rhs. Throws Error if |mean(rhs)| > tol.
GridField solve_poisson_periodic(const SpectralGrid& grid, const GridField& rhs, double tol);

// Right side a_jk + a_jl ∂_l chi_k - â_jk of the flux-potential problem.
GridField flux_defect(const SampledCoefficient& a, const SpectralGrid& grid, const std::vector<GridField>& chi,
                      const Tensor2& A_hat, int j, int k);

// Runs every cell solve. Default tol 1e-10 relative.
CorrectorSet compute_correctors(const CoefficientField& field, int n, double tol = 1e-10);

// Binary layout: 8-byte magic "TSCORR01", uint32 d, N, field count, reserved (0),
// then each field as N^d little-endian float64 values in row-major order
// (chi, upsilon, b, bigB), then A_hat as d*d float64 values.
void save_correctors(const CorrectorSet& set, const std::string& path);
CorrectorSet load_correctors(const std::string& path);
// File name for the cache entry keyed by (family, params, N, tol).
std::string corrector_cache_name(const CoefficientField& field, int n, double tol);
CorrectorSet load_or_compute_correctors(const CoefficientField& field, int n, double tol,
                                        const std::string& cache_dir);

// Band-limited trigonometric interpolant of a grid field, evaluable at any y.
class TrigInterpolant {
public:
    TrigInterpolant() = default;
    TrigInterpolant(const SpectralGrid& grid, const GridField& values);

    double value(double y1, double y2 = 0.0) const;
    // Gradient with respect to y.
    Eigen::Vector2d gradient(double y1, double y2 = 0.0) const;

private:
    int dim_ = 0, n_ = 0;
    std::vector<std::complex<double>> coef_;
    void basis(double y, std::vector<std::complex<double>>& e, std::vector<std::complex<double>>* de) const;
};

}  // namespace twoscale
