#pragma once

#include "voxatlas/volume.hpp"

namespace voxatlas {

enum class Conduction { exponential, rational };

struct DiffusionSettings {
    int iterations = 10;
    double kappa = 30.0;      // conduction threshold, intensity units per mm
    double dt = 1.0 / 7.0;    // unitless explicit time step, must be in (0, 1/6]
    Conduction conduction = Conduction::exponential;

    /// Throws errc::settings outside the stability bound or invariants.
    void validate() const;
};

/// Explicit Perona-Malik smoothing with 6-neighbor face fluxes and zero-flux
/// boundaries. Gradient magnitudes fed to the conduction function are scaled
/// by voxel spacing; fluxes telescope, so the intensity sum is conserved and
/// with dt <= 1/6 each update is a convex combination of neighbors (extrema
/// never expand).
Volume anisotropic_diffusion(const Volume& input, const DiffusionSettings& settings = {});

}  // namespace voxatlas
