#pragma once

#include <vector>

namespace twoscale {

// Least squares on (log ε, log value). Nonpositive values are dropped and their
// indices listed in `floored`; fewer than three usable points throws Error.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;  // max |log value - fit| over used points
    int used = 0;
    std::vector<int> floored;
};

RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& values);

// log(v0/v1) / log(e0/e1); NaN when either value is nonpositive.
double two_point_slope(double e0, double v0, double e1, double v1);

}  // namespace twoscale
