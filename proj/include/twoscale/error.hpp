#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace twoscale {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid family name, parameters, or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Iterative or direct solver failed; carries the last residual.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + format(residual) + ")"), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
    static std::string format(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", x);
        return buf;
    }
};

// Mesh too coarse for the requested ε.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& what, double required_h)
        : Error(what), required_h_(required_h) {}
    double required_h() const { return required_h_; }

private:
    double required_h_;
};

// Eigenvalue count in the search window differs from the expected multiplicity.
class ClusterError : public Error {
public:
    using Error::Error;
};

}  // namespace twoscale
