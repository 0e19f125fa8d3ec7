#pragma once

#include <array>
#include <cstddef>

#include "voxatlas/types.hpp"

namespace voxatlas {

/// Voxel grid placement in physical space. Memory layout of the matching data
/// arrays is row-major with x fastest: index = i + nx*(j + ny*k).
struct Geometry {
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
    Vec3 origin{};                                 // world position of voxel (0,0,0)
    Mat3 direction = Mat3::identity();             // orthonormal columns

    /// Throws errc::settings if dims/spacing/direction violate the grid invariants.
    void validate() const;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    bool same_grid(const Geometry& other, double tol = 1e-5) const;
};

inline std::size_t linear_index(const Geometry& g, int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(g.dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(g.dims[1]) * static_cast<std::size_t>(k));
}

/// origin + direction * (spacing .* index). Throws errc::bounds when the index
/// is outside the grid.
Vec3 voxel_to_world(const Geometry& g, int i, int j, int k);

/// Same map extended to fractional indices, no bounds check.
Vec3 continuous_index_to_world(const Geometry& g, const Vec3& index);

/// Inverse of continuous_index_to_world (direction is orthonormal, so the
/// inverse is the transpose).
Vec3 world_to_continuous_index(const Geometry& g, const Vec3& world);

}  // namespace voxatlas
