#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxatlas/geometry.hpp"

namespace voxatlas {

inline constexpr int kNumTissueClasses = 4;  // 0 BG, 1 CSF, 2 GM, 3 WM

/// Scalar 3D image. Treated as immutable once built; algorithms produce new
/// volumes instead of mutating in place, so concurrent reads are safe.
class Volume {
public:
    Volume() = default;
    Volume(Geometry geometry, std::vector<float> data);

    static Volume filled(const Geometry& geometry, float value);

    const Geometry& geometry() const noexcept { return geom_; }
    std::span<const float> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    float operator()(int i, int j, int k) const { return data_[linear_index(geom_, i, j, k)]; }
    float operator[](std::size_t idx) const { return data_[idx]; }

    /// Throws errc::numerical_failure if any intensity is NaN/Inf. Called by
    /// the I/O layer after load and by algorithms before returning results.
    void check_finite(const char* context) const;

private:
    Geometry geom_;
    std::vector<float> data_;
};

/// Per-voxel tissue class sharing the Volume geometry. Labels are restricted
/// to {0,1,2,3}; construction enforces the domain.
class LabelVolume {
public:
    LabelVolume() = default;
    LabelVolume(Geometry geometry, std::vector<std::uint8_t> data);

    static LabelVolume filled(const Geometry& geometry, std::uint8_t value);

    const Geometry& geometry() const noexcept { return geom_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::uint8_t operator()(int i, int j, int k) const { return data_[linear_index(geom_, i, j, k)]; }
    std::uint8_t operator[](std::size_t idx) const { return data_[idx]; }

private:
    Geometry geom_;
    std::vector<std::uint8_t> data_;
};

/// Binary tissue mask: label 1 where intensity > 0. The IBSR18 volumes are
/// skull-stripped, so this is the brain mask.
LabelVolume threshold_mask(const Volume& v);

}  // namespace voxatlas
