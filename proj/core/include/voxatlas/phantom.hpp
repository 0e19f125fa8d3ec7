#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "voxatlas/volume.hpp"

namespace voxatlas {

/// Concentric-ellipsoid phantom: WM core inside a GM shell inside a CSF
/// shell, with per-tissue mean intensities, an optional smooth multiplicative
/// bias and additive Gaussian noise (tissue voxels only, so the background
/// stays exactly zero like skull-stripped data). The seed drives noise, the
/// bias center, and a small rigid jitter of the ellipsoid pose so distinct
/// seeds yield genuinely misaligned anatomy.
struct PhantomSpec {
    std::array<int, 3> dims{64, 64, 64};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> wm_radii{10.0, 8.0, 9.0};    // mm, strictly nested:
    std::array<double, 3> gm_radii{16.0, 13.0, 14.0};  //   wm < gm < csf per axis
    std::array<double, 3> csf_radii{22.0, 18.0, 20.0};
    double csf_intensity = 60.0;
    double gm_intensity = 110.0;
    double wm_intensity = 160.0;  // T1 ordering: WM brightest
    double bias_amplitude = 0.0;  // multiplicative field spans [1-a, 1+a]
    double noise_sigma = 0.0;
    double pose_jitter_mm = 0.0;   // max |translation| of the ellipsoid center
    double pose_jitter_deg = 0.0;  // max rotation about each axis
    std::uint64_t seed = 0;

    void validate() const;
};

std::pair<Volume, LabelVolume> generate_phantom(const PhantomSpec& spec);

}  // namespace voxatlas
