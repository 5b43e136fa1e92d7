#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace twoscale {

// Symmetric 2x2 tensor; in d = 1 only (0,0) is meaningful.
using Tensor2 = Eigen::Matrix2d;

// Periodic coefficient A(y) on the unit torus, scalar equation (m = 1).
// Immutable after construction; safe to evaluate concurrently.
class CoefficientField {
public:
    using Evaluator = std::function<Tensor2(double, double)>;

    CoefficientField(int dim, std::string family, std::vector<double> params, Evaluator eval);

    int dim() const { return dim_; }
    const std::string& family() const { return family_; }
    const std::vector<double>& params() const { return params_; }

    // A(y) with y reduced modulo 1 first; y2 is ignored when dim == 1.
    Tensor2 sample(double y1, double y2 = 0.0) const;
    // Same as sample but without the modulo reduction (used to probe periodicity).
    Tensor2 sample_raw(double y1, double y2 = 0.0) const { return eval_(y1, y2); }

    // True when A(y) = a(y) I, so Voigt-Reuss bounds apply.
    bool is_scalar() const { return scalar_; }
    void set_scalar(bool s) { scalar_ = s; }

    // Canonical string for cache keys, e.g. "trig2d(1)".
    std::string key() const;

private:
    int dim_;
    std::string family_;
    std::vector<double> params_;
    Evaluator eval_;
    bool scalar_ = false;
};

struct AssumptionReport {
    double lambda_min = 0.0;  // measured Λ⁻¹
    double lambda_max = 0.0;  // measured Λ
    double symmetry_defect = 0.0;
    double periodicity_defect = 0.0;
    std::array<double, 2> argmin{0.0, 0.0};
    bool passed = false;
};

// Families: identity, trig1d(phi), trig2d(s), aniso2d(alpha, beta, gamma), constant(a11, a12, a22).
// Throws ConfigError for unknown names or parameters that break ellipticity.
CoefficientField make_family(const std::string& name, const std::vector<double>& params, int dim = 0);

AssumptionReport check_assumptions(const CoefficientField& field, int grid, double tol);

}  // namespace twoscale
