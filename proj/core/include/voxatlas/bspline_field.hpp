#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "voxatlas/geometry.hpp"

namespace voxatlas {

/// Scalar cubic B-spline lattice over a voxel grid. The grid parameter runs
/// u = index * spans / (dim - 1), so the spline domain exactly covers the
/// image; control points per axis = spans + 3.
struct BSplineFieldLevel {
    std::array<int, 3> spans{1, 1, 1};
    std::array<int, 3> cp_dims{4, 4, 4};
    std::vector<double> coeff;  // one scalar per control point, x fastest

    static BSplineFieldLevel zero(const std::array<int, 3>& spans);
};

/// Least-squares style scattered-data approximation (Lee et al. BA update):
/// each masked voxel distributes its value over the 4x4x4 support weighted by
/// the squared basis, and each control point averages the proposals.
BSplineFieldLevel fit_scalar_spline(const Geometry& g, std::span<const double> values,
                                    std::span<const std::uint8_t> mask, const std::array<int, 3>& spans);

/// Adds the lattice evaluation at every voxel of `g` into `accum`.
void add_spline_evaluation(const BSplineFieldLevel& level, const Geometry& g, std::span<double> accum);

/// In-place coefficient sum of two equally shaped lattices.
void add_lattice(BSplineFieldLevel& into, const BSplineFieldLevel& from);

}  // namespace voxatlas
