#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace twoscale {

// Bowyer-Watson Delaunay triangulation of a planar point set.
// Predicates see the sheared coordinates (x + shear*y, y): cocircular lattice
// squares are then split deterministically along the (1,0)-(0,1) diagonal.
// Returns counter-clockwise triangles (in the unsheared coordinates).
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Eigen::Vector2d>& points,
                                                     double shear = 1e-7);

}  // namespace twoscale
