#include "voxatlas/transform.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "voxatlas/error.hpp"

namespace voxatlas {

using nlohmann::json;

RigidTransform RigidTransform::inverse() const {
    // Inverse of p -> R(p-c)+c+t is p -> R^T(p-c-t)+c, kept in matrix form via
    // an equivalent rigid with transposed rotation. Euler angles of R^T for
    // ZYX composition are recovered from the matrix.
    const Mat3 rt = matrix().transposed();
    // rt = Rz(a)Ry(b)Rx(g): b = -asin(rt20), a = atan2(rt10, rt00), g = atan2(rt21, rt22)
    const double b = std::asin(-rt(2, 0));
    const double a = std::atan2(rt(1, 0), rt(0, 0));
    const double g = std::atan2(rt(2, 1), rt(2, 2));
    RigidTransform inv;
    inv.rotation = {g, b, a};
    inv.center = center;
    inv.translation = rt * (translation * -1.0);
    return inv;
}

AffineTransform AffineTransform::inverse() const {
    AffineTransform inv;
    inv.matrix = voxatlas::inverse(matrix);
    inv.center = center;
    inv.translation = inv.matrix * (translation * -1.0);
    return inv;
}

void AffineTransform::validate() const {
    const double d = matrix.det();
    if (!(d > 0.0)) fail(errc::settings, "affine: determinant must be positive");
    if (d < 0.2 || d > 5.0) fail(errc::settings, "affine: determinant outside [0.2, 5] collapse guard");
}

std::array<double, 4> cubic_bspline_weights(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {(1.0 - 3.0 * t + 3.0 * t2 - t3) / 6.0,
            (4.0 - 6.0 * t2 + 3.0 * t3) / 6.0,
            (1.0 + 3.0 * t + 3.0 * t2 - 3.0 * t3) / 6.0,
            t3 / 6.0};
}

Vec3 BSplineTransform::displacement(const Vec3& p) const {
    const int cells_x = grid_dims[0] - 3;
    const int cells_y = grid_dims[1] - 3;
    const int cells_z = grid_dims[2] - 3;
    double u[3];
    u[0] = (p.x - grid_origin.x) / grid_spacing[0];
    u[1] = (p.y - grid_origin.y) / grid_spacing[1];
    u[2] = (p.z - grid_origin.z) / grid_spacing[2];

    int cell[3];
    double frac[3];
    const int cells[3] = {cells_x, cells_y, cells_z};
    for (int a = 0; a < 3; ++a) {
        if (u[a] < 0.0 || u[a] > cells[a]) return {0, 0, 0};  // outside grid support
        cell[a] = static_cast<int>(u[a]);
        if (cell[a] >= cells[a]) cell[a] = cells[a] - 1;  // u == cells lands in the last cell
        frac[a] = u[a] - cell[a];
    }

    const auto wx = cubic_bspline_weights(frac[0]);
    const auto wy = cubic_bspline_weights(frac[1]);
    const auto wz = cubic_bspline_weights(frac[2]);

    Vec3 d{0, 0, 0};
    for (int kz = 0; kz < 4; ++kz) {
        const std::size_t zoff = static_cast<std::size_t>(cell[2] + kz) * grid_dims[1];
        for (int ky = 0; ky < 4; ++ky) {
            const double wyz = wy[ky] * wz[kz];
            const std::size_t yoff = (zoff + static_cast<std::size_t>(cell[1] + ky)) * grid_dims[0];
            for (int kx = 0; kx < 4; ++kx) {
                const double w = wx[kx] * wyz;
                const std::size_t c = (yoff + static_cast<std::size_t>(cell[0] + kx)) * 3;
                d.x += w * coefficients[c];
                d.y += w * coefficients[c + 1];
                d.z += w * coefficients[c + 2];
            }
        }
    }
    return d;
}

BSplineTransform BSplineTransform::for_domain(const Geometry& fixed, const AffineTransform& base, double cell_mm) {
    if (!(cell_mm > 0.0)) fail(errc::settings, "bspline: grid spacing must be positive");

    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 idx{(corner & 1) ? double(fixed.dims[0] - 1) : 0.0,
                       (corner & 2) ? double(fixed.dims[1] - 1) : 0.0,
                       (corner & 4) ? double(fixed.dims[2] - 1) : 0.0};
        const Vec3 w = continuous_index_to_world(fixed, idx);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], w[a]);
            hi[a] = std::max(hi[a], w[a]);
        }
    }

    BSplineTransform t;
    t.base = base;
    for (int a = 0; a < 3; ++a) {
        const double extent = hi[a] - lo[a];
        const int cells = std::max(1, static_cast<int>(std::ceil(extent / cell_mm))) + 2;  // one-cell margin per side
        t.grid_spacing[a] = cell_mm;
        t.grid_dims[a] = cells + 3;
        // grid parameter 0 sits one cell before the FOV, centered on the extent
        const double covered = cells * cell_mm;
        t.grid_origin[a] = lo[a] - (covered - extent) / 2.0;
    }
    t.coefficients.assign(t.control_point_count() * 3, 0.0);
    return t;
}

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json mat_to_json(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
}

Mat3 mat_from_json(const json& j) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

json affine_to_json(const AffineTransform& t) {
    return json{{"type", "affine"},
                {"matrix", mat_to_json(t.matrix)},
                {"translation", vec_to_json(t.translation)},
                {"center", vec_to_json(t.center)}};
}

AffineTransform affine_from_json(const json& j) {
    AffineTransform t;
    t.matrix = mat_from_json(j.at("matrix"));
    t.translation = vec_from_json(j.at("translation"));
    t.center = vec_from_json(j.at("center"));
    return t;
}

}  // namespace

void save_transform(const Transform& t, const std::filesystem::path& path) {
    json j;
    if (const auto* r = std::get_if<RigidTransform>(&t)) {
        j = json{{"type", "rigid"},
                 {"rotation", vec_to_json(r->rotation)},
                 {"translation", vec_to_json(r->translation)},
                 {"center", vec_to_json(r->center)}};
    } else if (const auto* a = std::get_if<AffineTransform>(&t)) {
        j = affine_to_json(*a);
    } else {
        const auto& b = std::get<BSplineTransform>(t);
        j = json{{"type", "bspline"},
                 {"base", affine_to_json(b.base)},
                 {"grid_origin", vec_to_json(b.grid_origin)},
                 {"grid_spacing", b.grid_spacing},
                 {"grid_dims", b.grid_dims},
                 {"coefficients", b.coefficients}};
    }
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot open transform file for writing: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) fail(errc::io, "failed writing transform file: " + path.string());
}

Transform load_transform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot open transform file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(errc::format, "transform file " + path.string() + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "rigid") {
        RigidTransform t;
        t.rotation = vec_from_json(j.at("rotation"));
        t.translation = vec_from_json(j.at("translation"));
        t.center = vec_from_json(j.at("center"));
        return t;
    }
    if (type == "affine") return affine_from_json(j);
    if (type == "bspline") {
        BSplineTransform t;
        t.base = affine_from_json(j.at("base"));
        t.grid_origin = vec_from_json(j.at("grid_origin"));
        t.grid_spacing = j.at("grid_spacing").get<std::array<double, 3>>();
        t.grid_dims = j.at("grid_dims").get<std::array<int, 3>>();
        t.coefficients = j.at("coefficients").get<std::vector<double>>();
        if (t.coefficients.size() != t.control_point_count() * 3)
            fail(errc::format, "transform file " + path.string() + ": coefficient count mismatch");
        return t;
    }
    fail(errc::format, "transform file " + path.string() + ": unknown type \"" + type + "\"");
}

}  // namespace voxatlas
