#include "voxatlas/sampling.hpp"

#include <cmath>

#include "voxatlas/error.hpp"
#include "voxatlas/parallel.hpp"

namespace voxatlas {

namespace {

constexpr double kNodeSnap = 1e-6;  // voxel units

// Snap continuous indices that sit within kNodeSnap of an integer node.
inline double snapped(double u) {
    const double r = std::round(u);
    return std::abs(u - r) < kNodeSnap ? r : u;
}

struct TrilinearCell {
    int i0, j0, k0;
    double fx, fy, fz;
    bool in_field;
};

inline TrilinearCell locate(const Geometry& g, const Vec3& world) {
    const Vec3 u = world_to_continuous_index(g, world);
    TrilinearCell c{};
    const double ux = snapped(u.x), uy = snapped(u.y), uz = snapped(u.z);
    c.in_field = ux >= 0.0 && ux <= g.dims[0] - 1 && uy >= 0.0 && uy <= g.dims[1] - 1 && uz >= 0.0 &&
                 uz <= g.dims[2] - 1;
    if (!c.in_field) return c;
    c.i0 = std::min(static_cast<int>(ux), g.dims[0] - 2);
    c.j0 = std::min(static_cast<int>(uy), g.dims[1] - 2);
    c.k0 = std::min(static_cast<int>(uz), g.dims[2] - 2);
    if (g.dims[0] == 1) c.i0 = 0;
    if (g.dims[1] == 1) c.j0 = 0;
    if (g.dims[2] == 1) c.k0 = 0;
    c.fx = ux - c.i0;
    c.fy = uy - c.j0;
    c.fz = uz - c.k0;
    return c;
}

inline int clamp_hi(int i, int n) { return i < n ? i : n - 1; }

}  // namespace

float trilinear_sample(const Volume& v, const Vec3& world, float background) {
    const Geometry& g = v.geometry();
    const TrilinearCell c = locate(g, world);
    if (!c.in_field) return background;
    const int i1 = clamp_hi(c.i0 + 1, g.dims[0]);
    const int j1 = clamp_hi(c.j0 + 1, g.dims[1]);
    const int k1 = clamp_hi(c.k0 + 1, g.dims[2]);

    const double v000 = v(c.i0, c.j0, c.k0), v100 = v(i1, c.j0, c.k0);
    const double v010 = v(c.i0, j1, c.k0), v110 = v(i1, j1, c.k0);
    const double v001 = v(c.i0, c.j0, k1), v101 = v(i1, c.j0, k1);
    const double v011 = v(c.i0, j1, k1), v111 = v(i1, j1, k1);

    const double c00 = v000 + (v100 - v000) * c.fx;
    const double c10 = v010 + (v110 - v010) * c.fx;
    const double c01 = v001 + (v101 - v001) * c.fx;
    const double c11 = v011 + (v111 - v011) * c.fx;
    const double c0 = c00 + (c10 - c00) * c.fy;
    const double c1 = c01 + (c11 - c01) * c.fy;
    return static_cast<float>(c0 + (c1 - c0) * c.fz);
}

SampleWithGradient trilinear_sample_with_gradient(const Volume& v, const Vec3& world) {
    const Geometry& g = v.geometry();
    SampleWithGradient out;
    const TrilinearCell c = locate(g, world);
    if (!c.in_field) return out;
    out.in_field = true;
    const int i1 = clamp_hi(c.i0 + 1, g.dims[0]);
    const int j1 = clamp_hi(c.j0 + 1, g.dims[1]);
    const int k1 = clamp_hi(c.k0 + 1, g.dims[2]);

    const double v000 = v(c.i0, c.j0, c.k0), v100 = v(i1, c.j0, c.k0);
    const double v010 = v(c.i0, j1, c.k0), v110 = v(i1, j1, c.k0);
    const double v001 = v(c.i0, c.j0, k1), v101 = v(i1, c.j0, k1);
    const double v011 = v(c.i0, j1, k1), v111 = v(i1, j1, k1);

    const double gx0 = (v100 - v000) * (1 - c.fy) + (v110 - v010) * c.fy;
    const double gx1 = (v101 - v001) * (1 - c.fy) + (v111 - v011) * c.fy;
    const double didx = gx0 * (1 - c.fz) + gx1 * c.fz;

    const double gy0 = (v010 - v000) * (1 - c.fx) + (v110 - v100) * c.fx;
    const double gy1 = (v011 - v001) * (1 - c.fx) + (v111 - v101) * c.fx;
    const double didy = gy0 * (1 - c.fz) + gy1 * c.fz;

    const double gz00 = v001 - v000, gz10 = v101 - v100, gz01 = v011 - v010, gz11 = v111 - v110;
    const double didz = (gz00 * (1 - c.fx) + gz10 * c.fx) * (1 - c.fy) + (gz01 * (1 - c.fx) + gz11 * c.fx) * c.fy;

    const double c00 = v000 + (v100 - v000) * c.fx;
    const double c10 = v010 + (v110 - v010) * c.fx;
    const double c01 = v001 + (v101 - v001) * c.fx;
    const double c11 = v011 + (v111 - v011) * c.fx;
    const double c0 = c00 + (c10 - c00) * c.fy;
    const double c1 = c01 + (c11 - c01) * c.fy;
    out.value = static_cast<float>(c0 + (c1 - c0) * c.fz);

    // d/dworld = direction * diag(1/spacing) applied to the index gradient
    const Vec3 gidx{didx / g.spacing[0], didy / g.spacing[1], didz / g.spacing[2]};
    out.world_gradient = g.direction * gidx;
    return out;
}

std::uint8_t nearest_sample(const LabelVolume& labels, const Vec3& world) {
    const Geometry& g = labels.geometry();
    const Vec3 u = world_to_continuous_index(g, world);
    // ceil(u - 0.5) rounds half-way cases toward the lower index
    const int i = static_cast<int>(std::ceil(u.x - 0.5));
    const int j = static_cast<int>(std::ceil(u.y - 0.5));
    const int k = static_cast<int>(std::ceil(u.z - 0.5));
    if (i < 0 || i >= g.dims[0] || j < 0 || j >= g.dims[1] || k < 0 || k >= g.dims[2]) return 0;
    return labels(i, j, k);
}

Volume resample(const Volume& input, const Transform& t, const Geometry& reference, Interp interp,
                float background) {
    reference.validate();
    std::vector<float> out(reference.voxel_count());
    const int nx = reference.dims[0], ny = reference.dims[1];
    parallel_for(static_cast<std::size_t>(reference.dims[2]), [&](std::size_t k) {
        std::size_t idx = static_cast<std::size_t>(k) * nx * ny;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                const Vec3 w = continuous_index_to_world(reference, {double(i), double(j), double(k)});
                const Vec3 p = apply(t, w);
                if (interp == Interp::trilinear) {
                    out[idx] = trilinear_sample(input, p, background);
                } else {
                    const Vec3 u = world_to_continuous_index(input.geometry(), p);
                    const int ii = static_cast<int>(std::ceil(u.x - 0.5));
                    const int jj = static_cast<int>(std::ceil(u.y - 0.5));
                    const int kk = static_cast<int>(std::ceil(u.z - 0.5));
                    const auto& ig = input.geometry();
                    out[idx] = (ii < 0 || ii >= ig.dims[0] || jj < 0 || jj >= ig.dims[1] || kk < 0 ||
                                kk >= ig.dims[2])
                                   ? background
                                   : input(ii, jj, kk);
                }
            }
        }
    });
    return Volume(reference, std::move(out));
}

LabelVolume resample(const LabelVolume& input, const Transform& t, const Geometry& reference, Interp interp) {
    if (interp != Interp::nearest)
        fail(errc::invalid_interpolation, "label volumes must be resampled with nearest-neighbor interpolation");
    reference.validate();
    std::vector<std::uint8_t> out(reference.voxel_count());
    const int nx = reference.dims[0], ny = reference.dims[1];
    parallel_for(static_cast<std::size_t>(reference.dims[2]), [&](std::size_t k) {
        std::size_t idx = static_cast<std::size_t>(k) * nx * ny;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                const Vec3 w = continuous_index_to_world(reference, {double(i), double(j), double(k)});
                out[idx] = nearest_sample(input, apply(t, w));
            }
        }
    });
    return LabelVolume(reference, std::move(out));
}

Volume gaussian_smooth(const Volume& input, const Vec3& sigma_mm) {
    const Geometry& g = input.geometry();
    std::vector<double> buf(input.data().begin(), input.data().end());
    std::vector<double> tmp(buf.size());

    const int n[3] = {g.dims[0], g.dims[1], g.dims[2]};
    const std::size_t stride[3] = {1, static_cast<std::size_t>(n[0]), static_cast<std::size_t>(n[0]) * n[1]};

    for (int axis = 0; axis < 3; ++axis) {
        const double sigma_vox = sigma_mm[axis] / g.spacing[axis];
        if (sigma_vox <= 0.0) continue;
        const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
        std::vector<double> kernel(2 * radius + 1);
        double sum = 0.0;
        for (int r = -radius; r <= radius; ++r) {
            kernel[r + radius] = std::exp(-0.5 * (r / sigma_vox) * (r / sigma_vox));
            sum += kernel[r + radius];
        }
        for (double& kv : kernel) kv /= sum;

        const int na = n[axis];
        const std::size_t sa = stride[axis];
        const int nb = n[(axis + 1) % 3];
        const int nc = n[(axis + 2) % 3];
        const std::size_t sb = stride[(axis + 1) % 3];
        const std::size_t sc = stride[(axis + 2) % 3];

        parallel_for(static_cast<std::size_t>(nc), [&](std::size_t c) {
            for (int b = 0; b < nb; ++b) {
                const std::size_t base = c * sc + static_cast<std::size_t>(b) * sb;
                for (int a = 0; a < na; ++a) {
                    double acc = 0.0;
                    for (int r = -radius; r <= radius; ++r) {
                        int src = a + r;
                        if (src < 0) src = 0;  // clamp boundary
                        if (src >= na) src = na - 1;
                        acc += kernel[r + radius] * buf[base + static_cast<std::size_t>(src) * sa];
                    }
                    tmp[base + static_cast<std::size_t>(a) * sa] = acc;
                }
            }
        });
        buf.swap(tmp);
    }

    std::vector<float> out(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = static_cast<float>(buf[i]);
    return Volume(g, std::move(out));
}

Vec3 center_of_mass(const Volume& v) {
    const Geometry& g = v.geometry();
    double total = 0.0;
    Vec3 acc{};
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                const double w = v[idx];
                if (w <= 0.0) continue;
                acc += continuous_index_to_world(g, {double(i), double(j), double(k)}) * w;
                total += w;
            }
    if (total <= 0.0) return grid_center(g);
    return acc / total;
}

Vec3 grid_center(const Geometry& g) {
    return continuous_index_to_world(
        g, {(g.dims[0] - 1) / 2.0, (g.dims[1] - 1) / 2.0, (g.dims[2] - 1) / 2.0});
}

}  // namespace voxatlas
