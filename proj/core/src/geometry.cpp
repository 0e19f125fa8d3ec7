#include "voxatlas/geometry.hpp"

#include <cmath>
#include <string>

#include "voxatlas/error.hpp"

namespace voxatlas {

Mat3 inverse(const Mat3& a) {
    const double d = a.det();
    Mat3 r;
    r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / d;
    r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / d;
    r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / d;
    r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / d;
    r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / d;
    r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / d;
    r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / d;
    r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / d;
    r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / d;
    return r;
}

Mat3 euler_zyx(const Vec3& angles) {
    const double cx = std::cos(angles.x), sx = std::sin(angles.x);
    const double cy = std::cos(angles.y), sy = std::sin(angles.y);
    const double cz = std::cos(angles.z), sz = std::sin(angles.z);
    Mat3 rx, ry, rz;
    rx.m = {1, 0, 0, 0, cx, -sx, 0, sx, cx};
    ry.m = {cy, 0, sy, 0, 1, 0, -sy, 0, cy};
    rz.m = {cz, -sz, 0, sz, cz, 0, 0, 0, 1};
    return rz * ry * rx;
}

void Geometry::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) fail(errc::settings, "geometry: dims must be >= 1");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            fail(errc::settings, "geometry: spacing must be positive");
    }
    constexpr double tol = 1e-6;
    for (int c = 0; c < 3; ++c) {
        const Vec3 col = direction.column(c);
        if (std::abs(norm(col) - 1.0) > tol)
            fail(errc::settings, "geometry: direction column " + std::to_string(c) + " is not unit length");
        for (int c2 = c + 1; c2 < 3; ++c2) {
            if (std::abs(dot(col, direction.column(c2))) > tol)
                fail(errc::settings, "geometry: direction columns are not orthogonal");
        }
    }
}

bool Geometry::same_grid(const Geometry& other, double tol) const {
    if (dims != other.dims) return false;
    for (int a = 0; a < 3; ++a)
        if (std::abs(spacing[a] - other.spacing[a]) > tol) return false;
    if (norm(origin - other.origin) > tol) return false;
    for (int i = 0; i < 9; ++i)
        if (std::abs(direction.m[i] - other.direction.m[i]) > tol) return false;
    return true;
}

Vec3 voxel_to_world(const Geometry& g, int i, int j, int k) {
    if (i < 0 || i >= g.dims[0] || j < 0 || j >= g.dims[1] || k < 0 || k >= g.dims[2])
        fail(errc::bounds, "voxel_to_world: index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                               std::to_string(k) + ") outside grid");
    return continuous_index_to_world(g, {static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)});
}

Vec3 continuous_index_to_world(const Geometry& g, const Vec3& index) {
    const Vec3 scaled{index.x * g.spacing[0], index.y * g.spacing[1], index.z * g.spacing[2]};
    return g.origin + g.direction * scaled;
}

Vec3 world_to_continuous_index(const Geometry& g, const Vec3& world) {
    const Vec3 local = g.direction.transposed() * (world - g.origin);
    return {local.x / g.spacing[0], local.y / g.spacing[1], local.z / g.spacing[2]};
}

}  // namespace voxatlas
