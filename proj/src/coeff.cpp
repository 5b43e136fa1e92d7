#include "twoscale/coeff.hpp"
#include "twoscale/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace twoscale {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double y) { return y - std::floor(y); }

Tensor2 diag2(double a11, double a22) {
    Tensor2 a;
    a << a11, 0.0, 0.0, a22;
    return a;
}

void require_count(const std::string& name, const std::vector<double>& params, std::size_t n) {
    if (params.size() != n) {
        std::ostringstream os;
        os << "family " << name << " expects " << n << " parameter(s), got " << params.size();
        throw ConfigError(os.str());
    }
}

}  // namespace

CoefficientField::CoefficientField(int dim, std::string family, std::vector<double> params, Evaluator eval)
    : dim_(dim), family_(std::move(family)), params_(std::move(params)), eval_(std::move(eval)) {
    if (dim_ != 1 && dim_ != 2) throw ConfigError("coefficient dimension must be 1 or 2");
}

Tensor2 CoefficientField::sample(double y1, double y2) const {
    return eval_(wrap(y1), dim_ == 2 ? wrap(y2) : 0.0);
}

std::string CoefficientField::key() const {
    std::ostringstream os;
    os.precision(17);
    os << family_ << "/d" << dim_ << "(";
    for (std::size_t i = 0; i < params_.size(); ++i) os << (i ? "," : "") << params_[i];
    os << ")";
    return os.str();
}

CoefficientField make_family(const std::string& name, const std::vector<double>& params, int dim) {
    if (name == "identity") {
        require_count(name, params, 0);
        const int d = dim == 0 ? 2 : dim;
        CoefficientField f(d, name, params, [d](double, double) {
            return d == 1 ? diag2(1.0, 0.0) : Tensor2(Tensor2::Identity());
        });
        f.set_scalar(true);
        return f;
    }
    if (name == "trig1d") {
        require_count(name, params, 1);
        if (dim != 0 && dim != 1) throw ConfigError("trig1d is one-dimensional");
        const double phi = params[0];
        CoefficientField f(1, name, params, [phi](double y, double) {
            return diag2(1.0 / (2.0 + std::cos(kTwoPi * y + phi)), 0.0);
        });
        f.set_scalar(true);
        return f;
    }
    if (name == "trig2d") {
        require_count(name, params, 1);
        if (dim != 0 && dim != 2) throw ConfigError("trig2d is two-dimensional");
        const double s = params[0];
        if (!(std::abs(s) < 2.0)) {
            std::ostringstream os;
            os << "trig2d amplitude |s| must be < 2 (s = " << s
               << "); A(y) is not positive at y = (0.75, 0.25)";
            throw ConfigError(os.str());
        }
        CoefficientField f(2, name, params, [s](double y1, double y2) {
            const double a = 2.0 + s * std::sin(kTwoPi * y1) * std::sin(kTwoPi * y2);
            return diag2(a, a);
        });
        f.set_scalar(true);
        return f;
    }
    if (name == "aniso2d") {
        require_count(name, params, 3);
        if (dim != 0 && dim != 2) throw ConfigError("aniso2d is two-dimensional");
        const double al = params[0], be = params[1], ga = params[2];
        auto eval = [al, be, ga](double y1, double y2) {
            Tensor2 a;
            const double off = ga * std::sin(kTwoPi * (y1 + y2));
            a << 3.0 + al * std::cos(kTwoPi * y1), off, off, 2.0 + be * std::sin(kTwoPi * y2);
            return a;
        };
        CoefficientField f(2, name, params, eval);
        AssumptionReport r = check_assumptions(f, 64, 1e-10);
        if (!(r.lambda_min > 1e-10)) {
            std::ostringstream os;
            os << "aniso2d parameters violate ellipticity: min eigenvalue " << r.lambda_min << " at y = ("
               << r.argmin[0] << ", " << r.argmin[1] << ")";
            throw ConfigError(os.str());
        }
        return f;
    }
    throw ConfigError("unknown coefficient family '" + name + "'");
}

AssumptionReport check_assumptions(const CoefficientField& field, int grid, double tol) {
    AssumptionReport r;
    r.lambda_min = std::numeric_limits<double>::infinity();
    r.lambda_max = -std::numeric_limits<double>::infinity();
    const int d = field.dim();
    const int n2 = d == 2 ? grid : 1;
    const double h = 1.0 / grid;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < n2; ++j) {
            const double y1 = i * h, y2 = j * h;
            const Tensor2 a = field.sample_raw(y1, y2);
            double lo, hi;
            if (d == 1) {
                lo = hi = a(0, 0);
            } else {
                r.symmetry_defect = std::max(r.symmetry_defect, std::abs(a(0, 1) - a(1, 0)));
                Eigen::SelfAdjointEigenSolver<Tensor2> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
                lo = es.eigenvalues()(0);
                hi = es.eigenvalues()(1);
            }
            if (lo < r.lambda_min) {
                r.lambda_min = lo;
                r.argmin = {y1, y2};
            }
            r.lambda_max = std::max(r.lambda_max, hi);
        }
    }
    // Compare opposite faces of the cell: y and y + e_k.
    for (int i = 0; i < grid; ++i) {
        const double t = i * h;
        const double p1 = (field.sample_raw(1.0, t) - field.sample_raw(0.0, t)).cwiseAbs().maxCoeff();
        double p2 = 0.0;
        if (d == 2) p2 = (field.sample_raw(t, 1.0) - field.sample_raw(t, 0.0)).cwiseAbs().maxCoeff();
        r.periodicity_defect = std::max({r.periodicity_defect, p1, p2});
    }
    r.passed = r.symmetry_defect <= tol && r.periodicity_defect <= tol && r.lambda_min > tol;
    return r;
}

}  // namespace twoscale
