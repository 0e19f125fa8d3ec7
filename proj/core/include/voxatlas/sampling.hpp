#pragma once

#include "voxatlas/transform.hpp"
#include "voxatlas/volume.hpp"

namespace voxatlas {

enum class Interp { trilinear, nearest };

/// Trilinear interpolation of the 8 surrounding voxels in index space.
/// Points outside the grid ([0, n-1] per axis) return `background`.
/// Continuous indices within 1e-6 voxel of a node are snapped to the node so
/// identity resampling reproduces the input exactly.
float trilinear_sample(const Volume& v, const Vec3& world, float background = 0.0f);

/// Nearest voxel center in index space; exact half-way ties round toward the
/// lower index. Points whose rounded index falls outside the grid return 0.
std::uint8_t nearest_sample(const LabelVolume& labels, const Vec3& world);

struct SampleWithGradient {
    float value = 0.0f;
    Vec3 world_gradient{};  // d(value)/d(world mm)
    bool in_field = false;
};

/// Trilinear value plus its spatial gradient; used by the registration
/// optimizer. Gradient of the interpolant, mapped to world coordinates.
SampleWithGradient trilinear_sample_with_gradient(const Volume& v, const Vec3& world);

/// Pull-back resampling: each output voxel takes the input's value at
/// transform(voxel_to_world(reference, index)). The transform maps reference
/// world coordinates into input world coordinates.
Volume resample(const Volume& input, const Transform& t, const Geometry& reference,
                Interp interp = Interp::trilinear, float background = 0.0f);

/// Label resampling is nearest-neighbor only; requesting trilinear throws
/// errc::invalid_interpolation.
LabelVolume resample(const LabelVolume& input, const Transform& t, const Geometry& reference,
                     Interp interp = Interp::nearest);

/// Separable Gaussian smoothing with sigma in mm per axis; zero sigma on an
/// axis skips it. Used by the registration pyramid.
Volume gaussian_smooth(const Volume& input, const Vec3& sigma_mm);

/// Averages the intensity-weighted voxel positions; falls back to the grid
/// center for all-zero images.
Vec3 center_of_mass(const Volume& v);

/// Grid center in world coordinates.
Vec3 grid_center(const Geometry& g);

}  // namespace voxatlas
