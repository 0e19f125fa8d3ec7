#pragma once

#include <array>
#include <filesystem>
#include <variant>
#include <vector>

#include "voxatlas/geometry.hpp"

namespace voxatlas {

/// p -> R(p - center) + center + translation, R = Rz*Ry*Rx.
struct RigidTransform {
    Vec3 rotation{};     // Euler angles (rx, ry, rz), radians, ZYX composition
    Vec3 translation{};  // mm
    Vec3 center{};       // mm

    Mat3 matrix() const { return euler_zyx(rotation); }
    Vec3 apply(const Vec3& p) const { return matrix() * (p - center) + center + translation; }
    RigidTransform inverse() const;
};

/// p -> M(p - center) + center + translation. Orientation preserving:
/// det(M) > 0 with |det| in [0.2, 5] as a collapse guard.
struct AffineTransform {
    Mat3 matrix = Mat3::identity();
    Vec3 translation{};
    Vec3 center{};

    Vec3 apply(const Vec3& p) const { return matrix * (p - center) + center + translation; }
    AffineTransform inverse() const;

    /// Throws errc::settings when the determinant guard is violated.
    void validate() const;

    static AffineTransform from_rigid(const RigidTransform& r) {
        return AffineTransform{r.matrix(), r.translation, r.center};
    }
};

/// Cubic B-spline free-form deformation composed additively on an affine
/// base: p -> base(p) + displacement(p). The control grid is axis aligned in
/// world space and covers the fixed-image field of view plus one cell margin;
/// displacement is zero outside the grid support.
struct BSplineTransform {
    AffineTransform base;
    Vec3 grid_origin{};                         // world mm of control point (0,0,0)
    std::array<double, 3> grid_spacing{1, 1, 1};  // mm per control cell
    std::array<int, 3> grid_dims{4, 4, 4};        // control points per axis (cells + 3)
    std::vector<double> coefficients;             // (dx,dy,dz) per control point, x fastest

    std::size_t control_point_count() const {
        return static_cast<std::size_t>(grid_dims[0]) * grid_dims[1] * grid_dims[2];
    }

    Vec3 displacement(const Vec3& p) const;
    Vec3 apply(const Vec3& p) const { return base.apply(p) + displacement(p); }

    /// All-zero grid covering the world-space bounding box of `fixed` with a
    /// one-cell margin on every side.
    static BSplineTransform for_domain(const Geometry& fixed, const AffineTransform& base, double cell_mm);
};

using Transform = std::variant<RigidTransform, AffineTransform, BSplineTransform>;

inline Vec3 apply(const Transform& t, const Vec3& p) {
    return std::visit([&](const auto& tt) { return tt.apply(p); }, t);
}

inline Transform identity_transform() { return RigidTransform{}; }

/// Cubic B-spline basis values for parameter t in [0,1): weights of the four
/// control points spanning the cell.
std::array<double, 4> cubic_bspline_weights(double t);

/// JSON text with a "type" tag; doubles round-trip exactly.
void save_transform(const Transform& t, const std::filesystem::path& path);
Transform load_transform(const std::filesystem::path& path);

}  // namespace voxatlas
