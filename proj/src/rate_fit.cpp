#include "twoscale/rate_fit.hpp"
#include "twoscale/error.hpp"

#include <cmath>
#include <limits>

namespace twoscale {

RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& values) {
    if (eps.size() != values.size()) throw Error("rate_fit: length mismatch");
    RateFit r;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(values[i] > 0.0) || !(eps[i] > 0.0) || !std::isfinite(values[i])) {
            r.floored.push_back(static_cast<int>(i));
            continue;
        }
        x.push_back(std::log(eps[i]));
        y.push_back(std::log(values[i]));
    }
    r.used = static_cast<int>(x.size());
    if (r.used < 3) throw Error("rate_fit: fewer than three usable points");
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < r.used; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= r.used;
    my /= r.used;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < r.used; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error("rate_fit: all ε values coincide");
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    for (int i = 0; i < r.used; ++i)
        r.max_residual = std::max(r.max_residual, std::abs(y[i] - r.intercept - r.slope * x[i]));
    return r;
}

double two_point_slope(double e0, double v0, double e1, double v1) {
    if (!(v0 > 0.0) || !(v1 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::log(v0 / v1) / std::log(e0 / e1);
}

}  // namespace twoscale
