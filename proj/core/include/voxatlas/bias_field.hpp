#pragma once

#include <vector>

#include "voxatlas/bspline_field.hpp"
#include "voxatlas/volume.hpp"

namespace voxatlas {

struct N4Settings {
    int fitting_levels = 4;
    int max_iterations_per_level = 50;
    double convergence_threshold = 0.001;  // CV of the ratio between successive fields
    int histogram_bins = 200;
    int bspline_grid = 4;       // control points per axis at the coarsest level
    double wiener_noise = 0.01;
    double fwhm = 0.15;         // histogram-sharpening kernel width, log-intensity units

    void validate() const;
};

struct N4Result {
    Volume corrected;
    Volume field;  // multiplicative bias, mean 1 over the mask, > 0 everywhere

    // The log-field is exactly the sum of these lattice evaluations minus
    // log_norm; kept so callers can verify the spline representation.
    std::vector<BSplineFieldLevel> levels;
    double log_norm = 0.0;

    std::vector<double> convergence;  // CV value per elapsed iteration
    int iterations = 0;
};

/// N4 bias-field correction: iteratively sharpens the log-intensity histogram
/// by Wiener deconvolution of a Gaussian bias model, fits the residual with a
/// multi-level B-spline, and accumulates the field until the coefficient of
/// variation of the field ratio drops below the threshold.
N4Result n4_correct(const Volume& input, const LabelVolume& mask, const N4Settings& settings = {});

}  // namespace voxatlas
