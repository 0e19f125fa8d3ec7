#include "voxatlas/volume.hpp"

#include <cmath>
#include <string>

#include "voxatlas/error.hpp"

namespace voxatlas {

Volume::Volume(Geometry geometry, std::vector<float> data) : geom_(geometry), data_(std::move(data)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count())
        fail(errc::settings, "volume: data length " + std::to_string(data_.size()) + " does not match dims");
}

Volume Volume::filled(const Geometry& geometry, float value) {
    return Volume(geometry, std::vector<float>(geometry.voxel_count(), value));
}

void Volume::check_finite(const char* context) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            fail(errc::numerical_failure,
                 std::string(context) + ": non-finite intensity at linear index " + std::to_string(i));
    }
}

LabelVolume::LabelVolume(Geometry geometry, std::vector<std::uint8_t> data)
    : geom_(geometry), data_(std::move(data)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count())
        fail(errc::settings, "label volume: data length does not match dims");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (data_[i] >= kNumTissueClasses)
            fail(errc::label_domain, "label volume: label " + std::to_string(int(data_[i])) +
                                         " at linear index " + std::to_string(i) + " outside {0,1,2,3}");
    }
}

LabelVolume LabelVolume::filled(const Geometry& geometry, std::uint8_t value) {
    return LabelVolume(geometry, std::vector<std::uint8_t>(geometry.voxel_count(), value));
}

LabelVolume threshold_mask(const Volume& v) {
    std::vector<std::uint8_t> mask(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) mask[i] = v[i] > 0.0f ? 1 : 0;
    return LabelVolume(v.geometry(), std::move(mask));
}

}  // namespace voxatlas
