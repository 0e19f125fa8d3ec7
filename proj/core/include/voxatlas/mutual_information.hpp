#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voxatlas/sampling.hpp"
#include "voxatlas/transform.hpp"
#include "voxatlas/volume.hpp"

namespace voxatlas {

/// Mutual information (nats) between the fixed intensities and the
/// transform-resampled moving intensities over their in-field overlap. The
/// joint histogram uses linear (partial-volume) binning on both axes so the
/// estimate varies smoothly with the transform. Throws errc::no_overlap when
/// fewer than two samples land inside the moving image.
double mutual_information(const Volume& fixed, const Volume& moving, const Transform& transform,
                          int bins = 32, const LabelVolume* mask = nullptr);

/// Reference selection for atlas building: score(i) = sum over j != i of
/// MI(volume_i, volume_j, identity); returns the argmax, ties broken by the
/// lowest index.
std::size_t select_reference(std::span<const Volume> volumes, int bins = 32);

/// Histogram-based MI estimator over a fixed list of sample points; the
/// registration optimizer evaluates it many times per level. Sample order is
/// fixed, so accumulation is deterministic. The window overloads evaluate a
/// cyclic slice of the sample list, which lets the optimizer use a fresh
/// subset each iteration while staying seeded and reproducible.
class MiEstimator {
public:
    /// With `out_of_field_as_background` the moving image reads 0 outside its
    /// grid instead of dropping the sample. That keeps the sample population
    /// constant, so shrinking the overlap can never raise the estimate; the
    /// registration optimizer relies on it (valid for skull-stripped data
    /// whose background is exactly zero). The default matches the public
    /// overlap-restricted definition.
    MiEstimator(const Volume& fixed, const Volume& moving, int bins, std::vector<std::size_t> sample_indices,
                bool out_of_field_as_background = false);

    double evaluate(const Transform& t) const;
    double evaluate_window(const Transform& t, std::size_t first, std::size_t count) const;

    /// MI plus its analytic gradient with respect to the B-spline
    /// coefficients (local-support chain rule through the moving-image
    /// gradient and the partial-volume bin weights).
    double evaluate_with_bspline_gradient(const BSplineTransform& t, std::span<double> gradient) const;
    double evaluate_with_bspline_gradient_window(const BSplineTransform& t, std::span<double> gradient,
                                                 std::size_t first, std::size_t count) const;

    std::size_t sample_count() const { return samples_.size(); }

private:
    struct Sample {
        Vec3 world;
        float fixed_value;
    };

    const Volume* moving_;
    int bins_;
    bool background_mode_ = false;
    std::vector<Sample> samples_;
    double fixed_lo_ = 0.0, fixed_scale_ = 0.0;
    double moving_lo_ = 0.0, moving_scale_ = 0.0;
};

}  // namespace voxatlas
