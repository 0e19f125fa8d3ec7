#pragma once

#include <cstdint>
#include <vector>

#include "voxatlas/transform.hpp"
#include "voxatlas/volume.hpp"

namespace voxatlas {

enum class RegistrationMode { rigid, affine, affine_bspline };

/// Multi-resolution staging. Per-level vectors must have pyramid_levels
/// entries, coarsest first.
struct RegistrationSettings {
    int pyramid_levels = 3;
    std::vector<double> smoothing_sigmas_mm{4.0, 2.0, 1.0};
    std::vector<int> downsample_factors{4, 2, 1};
    std::vector<int> iterations{256, 128, 64};
    std::vector<double> sample_fractions{0.10, 0.10, 0.25};
    int mi_bins = 32;

    // adaptive-step gradient ascent, step sizes in mm-equivalent units
    double initial_step_mm = 2.0;
    double max_step_mm = 8.0;
    double min_step_mm = 0.005;
    double gradient_probe_mm = 0.25;  // central-difference offset for rigid/affine

    double bspline_cell_mm = 20.0;
    int bspline_iterations = 64;

    void validate() const;
};

/// Registers `moving` onto `fixed`, maximizing partial-volume mutual
/// information. Pull-back convention: the result maps fixed-space world
/// points into moving space, so resample(moving, result, fixed.geometry())
/// aligns the moving image onto the fixed grid.
///
/// Stages run rigid -> affine -> B-spline as requested by `mode`, each
/// initialized from the previous, starting from center-of-mass alignment.
/// Candidate steps are only accepted when they improve the level objective,
/// and the final transform never scores below the initialization (guarded by
/// a full-volume MI comparison). Deterministic for a given seed.
Transform register_volumes(const Volume& fixed, const Volume& moving, RegistrationMode mode,
                           const RegistrationSettings& settings = {}, std::uint64_t seed = 0);

RegistrationMode parse_registration_mode(const std::string& name);
std::string to_string(RegistrationMode mode);

}  // namespace voxatlas
