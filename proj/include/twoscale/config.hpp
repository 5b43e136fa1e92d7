#pragma once

#include "twoscale/coeff.hpp"
#include "twoscale/fem.hpp"
#include "twoscale/mesh.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twoscale {

// Experiment description, read from a TOML file:
//
//   name = "dirichlet-trig2d"
//   boundary = "dirichlet"            # or "neumann"
//   eps = [0.125, 0.0625, 0.03125]    # strictly decreasing
//   resolution = 8                    # lattice spacing = eps / resolution
//   cell_grid = 64                    # spectral cell grid N
//   seed = 1
//   workers = 1
//   max_unknowns = 2000000            # meshing budget per row
//   coefficient = { family = "trig2d", params = [1.0] }
//   domain = { kind = "disk", a = 1.0, b = 1.0 }
//   [spectrum]
//   target = 11.25                    # eigenvalue of the homogenized operator to follow
//   multiplicity = 1
//   window = 0.15                     # half-width relative to target
//   [tolerances]
//   cell = 1e-10
//   eigen = 1e-10
//   [kbl]
//   method = "harmonic"               # or "finest" (smallest-ε layer as is)
//   degree = 6                        # Â-harmonic polynomial degree
//   interior = 0.2                    # fit on vertices at least this far from the boundary
//   [source]
//   f = 1.0                           # constant load for the H¹ residual
//   [output]
//   fields = false                    # write mesh-field dumps
struct ExperimentConfig {
    std::string name = "experiment";
    std::string family = "trig2d";
    std::vector<double> params{1.0};
    Domain domain = Domain::disk(1.0);
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    std::vector<double> eps{0.125, 0.0625, 0.03125};
    int resolution = 8;
    int cell_grid = 64;
    double target = 0.0;
    int multiplicity = 1;
    double window = 0.15;
    double cell_tol = 1e-10;
    double eigen_tol = 1e-10;
    double source_f = 1.0;
    std::uint64_t seed = 1;
    int workers = 1;
    long max_unknowns = 2000000;
    bool write_fields = false;
    std::string kbl_method = "harmonic";
    int kbl_degree = 6;
    double kbl_interior = 0.2;

    CoefficientField field() const { return make_family(family, params); }
    // Throws ConfigError on any violated invariant.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace twoscale
