#include "twoscale/oracle1d.hpp"
#include "twoscale/error.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace twoscale {

namespace {

namespace odeint = boost::numeric::odeint;
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

template <std::size_t N>
auto controlled(double tol) {
    return odeint::make_controlled<odeint::runge_kutta_fehlberg78<std::array<double, N>>>(tol, tol);
}

double coeff_at(const Oracle1DCase& c, double x, double eps) { return c.field.sample(x / eps)(0, 0); }

}  // namespace

double Oracle1DCase::lambda0() const { return a_hat * k * k * kPi * kPi; }
double Oracle1DCase::phi0(double x) const { return std::sqrt(2.0) * std::sin(k * kPi * x); }
double Oracle1DCase::dphi0(double x) const { return std::sqrt(2.0) * k * kPi * std::cos(k * kPi * x); }

double Oracle1DCase::chi(double y) const {
    return trivial ? 0.0 : std::sin(kTwoPi * y + phase) / (4.0 * kPi);
}
double Oracle1DCase::dchi(double y) const { return trivial ? 0.0 : 0.5 * std::cos(kTwoPi * y + phase); }
// Υ' = -χ with mean zero.
double Oracle1DCase::upsilon(double y) const {
    return trivial ? 0.0 : std::cos(kTwoPi * y + phase) / (8.0 * kPi * kPi);
}

Oracle1DCase make_oracle_case(const CoefficientField& field, int k) {
    if (field.dim() != 1) throw ConfigError("oracle1d needs a one-dimensional coefficient");
    if (k < 1) throw ConfigError("oracle1d mode index must be >= 1");
    Oracle1DCase c{field, k};
    if (field.family() == "identity") {
        c.trivial = true;
        c.a_hat = 1.0;
    } else if (field.family() == "trig1d") {
        c.phase = field.params().at(0);
        c.a_hat = 0.5;
    } else {
        throw ConfigError("oracle1d has closed forms only for identity and trig1d");
    }
    return c;
}

ShootingResult eigen_exact_eps(const Oracle1DCase& c, int n, int k, double tol, const std::vector<double>& samples) {
    if (n < 1 || k < 1) throw ConfigError("eigen_exact_eps needs n >= 1 and k >= 1");
    const double eps = 1.0 / n;
    const double ode_tol = std::min(1e-13, tol * 1e-3);

    double amin = 1e300, amax = 0.0;
    for (int i = 0; i < 512; ++i) {
        const double a = c.field.sample(i / 512.0)(0, 0);
        amin = std::min(amin, a);
        amax = std::max(amax, a);
    }

    // Prüfer angle: u = r sin θ, a u' = r cos θ, θ' = cos²θ / a + λ sin²θ.
    auto angle_at_one = [&](double lambda) {
        std::array<double, 1> th{0.0};
        auto sys = [&](const std::array<double, 1>& s, std::array<double, 1>& ds, double x) {
            const double cs = std::cos(s[0]), sn = std::sin(s[0]);
            ds[0] = cs * cs / coeff_at(c, x, eps) + lambda * sn * sn;
        };
        odeint::integrate_adaptive(controlled<1>(ode_tol), sys, th, 0.0, 1.0, eps / 64.0);
        return th[0] - k * kPi;
    };

    const double base = k * k * kPi * kPi;
    double lo = 0.99 * amin * base, hi = 1.01 * amax * base;
    const double flo = angle_at_one(lo), fhi = angle_at_one(hi);
    if (!(flo < 0.0 && fhi > 0.0)) {
        std::ostringstream os;
        os << "eigen_exact_eps: root bracket failure for k = " << k << " on [" << lo << ", " << hi << "]";
        throw Error(os.str());
    }
    std::uintmax_t iters = 200;
    auto stop = [tol](double a, double b) { return std::abs(b - a) <= 0.01 * tol * std::abs(a); };
    auto root = boost::math::tools::toms748_solve(angle_at_one, lo, hi, flo, fhi, stop, iters);
    ShootingResult res;
    res.lambda = 0.5 * (root.first + root.second);

    // Raw solution from u(0) = 0, a u'(0) = 1; accumulate ∫u² and ∫u φ0.
    auto raw = [&](const std::array<double, 4>& s, std::array<double, 4>& ds, double x) {
        ds[0] = s[1] / coeff_at(c, x, eps);
        ds[1] = -res.lambda * s[0];
        ds[2] = s[0] * s[0];
        ds[3] = s[0] * c.phi0(x);
    };
    std::array<double, 4> st{0.0, 1.0, 0.0, 0.0};
    odeint::integrate_adaptive(controlled<4>(ode_tol), raw, st, 0.0, 1.0, eps / 64.0);
    const double scale = (st[3] >= 0.0 ? 1.0 : -1.0) / std::sqrt(st[2]);

    if (!samples.empty()) {
        std::array<double, 4> s2{0.0, 1.0, 0.0, 0.0};
        std::vector<double> times = samples;
        odeint::integrate_times(controlled<4>(ode_tol), raw, s2, times.begin(), times.end(), eps / 64.0,
                                [&](const std::array<double, 4>& s, double x) {
                                    res.x.push_back(x);
                                    res.u.push_back(scale * s[0]);
                                    res.du.push_back(scale * s[1] / coeff_at(c, x, eps));
                                });
    }
    return res;
}

double PsiBl1D::value(double x) const { return amplitude * std::cos(k * kPi * x); }
double PsiBl1D::derivative(double x) const { return -amplitude * k * kPi * std::sin(k * kPi * x); }

PsiBl1D psi_bl_exact(const Oracle1DCase& c) {
    PsiBl1D p;
    p.k = c.k;
    p.amplitude = -c.chi0() * std::sqrt(2.0) * c.k * kPi;
    p.theta = 0.0;
    return p;
}

double kbl_phi0_exact(const Oracle1DCase& c, double x) {
    const double left = -c.chi0() * c.dphi0(0.0);
    const double right = -c.chi0() * c.dphi0(1.0);
    return left + (right - left) * x;
}

std::vector<Residual1DRow> expansion_residuals_1d(const Oracle1DCase& c, const std::vector<int>& ns, double tol) {
    std::vector<Residual1DRow> rows;
    const PsiBl1D psi = psi_bl_exact(c);
    const double ode_tol = std::min(1e-13, tol * 1e-3);
    for (int n : ns) {
        const double eps = 1.0 / n;
        const ShootingResult sr = eigen_exact_eps(c, n, c.k, tol);
        // Normalization pass, then a pass integrating the squared residuals directly
        // so that tiny norms do not suffer cancellation.
        auto raw = [&](const std::array<double, 4>& s, std::array<double, 4>& ds, double x) {
            ds[0] = s[1] / coeff_at(c, x, eps);
            ds[1] = -sr.lambda * s[0];
            ds[2] = s[0] * s[0];
            ds[3] = s[0] * c.phi0(x);
        };
        std::array<double, 4> st{0.0, 1.0, 0.0, 0.0};
        odeint::integrate_adaptive(controlled<4>(ode_tol), raw, st, 0.0, 1.0, eps / 64.0);
        const double scale = (st[3] >= 0.0 ? 1.0 : -1.0) / std::sqrt(st[2]);

        auto res = [&](const std::array<double, 5>& s, std::array<double, 5>& ds, double x) {
            ds[0] = s[1] / coeff_at(c, x, eps);
            ds[1] = -sr.lambda * s[0];
            const double u = scale * s[0];
            const double d0 = u - c.phi0(x);
            const double d1 = d0 - eps * c.chi(x / eps) * c.dphi0(x);
            const double d2 = d1 - eps * psi.value(x);
            ds[2] = d0 * d0;
            ds[3] = d1 * d1;
            ds[4] = d2 * d2;
        };
        std::array<double, 5> sr2{0.0, 1.0, 0.0, 0.0, 0.0};
        odeint::integrate_adaptive(controlled<5>(ode_tol), res, sr2, 0.0, 1.0, eps / 64.0);

        Residual1DRow row;
        row.n = n;
        row.eps = eps;
        row.lambda_eps = sr.lambda;
        row.lambda0 = c.lambda0();
        row.r0 = std::abs(sr.lambda - row.lambda0);
        row.r1 = std::abs(sr.lambda - row.lambda0 - eps * psi.theta);
        row.e0 = std::sqrt(sr2[2]);
        row.e1 = std::sqrt(sr2[3]);
        row.e2 = std::sqrt(sr2[4]);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace twoscale
