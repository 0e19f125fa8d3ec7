#include "voxatlas/phantom.hpp"

#include <cmath>

#include "voxatlas/error.hpp"
#include "voxatlas/rng.hpp"
#include "voxatlas/sampling.hpp"

namespace voxatlas {

void PhantomSpec::validate() const {
    Geometry g{dims, spacing, {}, Mat3::identity()};
    g.validate();
    for (int a = 0; a < 3; ++a) {
        if (!(wm_radii[a] > 0.0)) fail(errc::settings, "phantom: radii must be positive");
        if (!(wm_radii[a] < gm_radii[a] && gm_radii[a] < csf_radii[a]))
            fail(errc::settings, "phantom: radii must be strictly nested (wm < gm < csf)");
    }
    if (csf_intensity == gm_intensity || gm_intensity == wm_intensity || csf_intensity == wm_intensity)
        fail(errc::settings, "phantom: tissue intensities must be distinct");
    if (bias_amplitude < 0.0 || bias_amplitude >= 1.0)
        fail(errc::settings, "phantom: bias amplitude must be in [0, 1)");
    if (noise_sigma < 0.0) fail(errc::settings, "phantom: noise sigma must be >= 0");
    if (pose_jitter_mm < 0.0 || pose_jitter_deg < 0.0)
        fail(errc::settings, "phantom: pose jitter must be >= 0");
}

std::pair<Volume, LabelVolume> generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Geometry g;
    g.dims = spec.dims;
    g.spacing = spec.spacing;

    Rng rng(splitmix64(spec.seed));

    // seeded rigid jitter of the ellipsoid ensemble (volume preserving)
    Vec3 shift{0, 0, 0}, angles{0, 0, 0};
    if (spec.pose_jitter_mm > 0.0)
        shift = {rng.uniform(-spec.pose_jitter_mm, spec.pose_jitter_mm),
                 rng.uniform(-spec.pose_jitter_mm, spec.pose_jitter_mm),
                 rng.uniform(-spec.pose_jitter_mm, spec.pose_jitter_mm)};
    if (spec.pose_jitter_deg > 0.0) {
        const double r = spec.pose_jitter_deg * 3.14159265358979323846 / 180.0;
        angles = {rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)};
    }
    const Mat3 rot_inv = euler_zyx(angles).transposed();
    const Vec3 center = grid_center(g) + shift;

    // bias bump center drawn inside the middle half of the volume
    Vec3 bias_center = center;
    double bias_sigma = 0.0;
    if (spec.bias_amplitude > 0.0) {
        Vec3 extent{(g.dims[0] - 1) * g.spacing[0], (g.dims[1] - 1) * g.spacing[1],
                    (g.dims[2] - 1) * g.spacing[2]};
        bias_center = grid_center(g) + Vec3{extent.x * rng.uniform(-0.25, 0.25),
                                            extent.y * rng.uniform(-0.25, 0.25),
                                            extent.z * rng.uniform(-0.25, 0.25)};
        bias_sigma = 0.4 * norm(extent);
    }

    const double means[kNumTissueClasses] = {0.0, spec.csf_intensity, spec.gm_intensity, spec.wm_intensity};

    const std::size_t n = g.voxel_count();
    std::vector<std::uint8_t> labels(n, 0);
    std::vector<float> values(n, 0.0f);

    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                const Vec3 w = continuous_index_to_world(g, {double(i), double(j), double(k)});
                const Vec3 p = rot_inv * (w - center);  // ellipsoid frame

                auto inside = [&](const std::array<double, 3>& radii) {
                    const double q = (p.x / radii[0]) * (p.x / radii[0]) +
                                     (p.y / radii[1]) * (p.y / radii[1]) +
                                     (p.z / radii[2]) * (p.z / radii[2]);
                    return q <= 1.0;
                };

                std::uint8_t label = 0;
                if (inside(spec.wm_radii)) label = 3;
                else if (inside(spec.gm_radii)) label = 2;
                else if (inside(spec.csf_radii)) label = 1;
                labels[idx] = label;
                if (label == 0) continue;  // background stays exactly zero

                double v = means[label];
                if (spec.bias_amplitude > 0.0) {
                    const Vec3 d = w - bias_center;
                    const double gaussian = std::exp(-0.5 * dot(d, d) / (bias_sigma * bias_sigma));
                    v *= 1.0 + spec.bias_amplitude * (2.0 * gaussian - 1.0);
                }
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
                values[idx] = static_cast<float>(std::max(v, 1e-3));  // keep tissue inside the {>0} mask
            }
        }
    }

    return {Volume(g, std::move(values)), LabelVolume(g, std::move(labels))};
}

}  // namespace voxatlas
