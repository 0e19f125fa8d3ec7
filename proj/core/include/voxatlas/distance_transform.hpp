#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxatlas/geometry.hpp"

namespace voxatlas {

/// Exact squared Euclidean distance transform: for every voxel, the squared
/// physical distance (mm^2, spacing-aware) to the nearest nonzero voxel
/// center of `sites`. Separable lower-envelope passes; envelope decisions use
/// exact rational comparisons so the result matches a brute-force pairwise
/// scan whenever spacings are exactly representable. Returns +infinity
/// everywhere when `sites` is empty.
std::vector<double> squared_distance_transform(const Geometry& g, std::span<const std::uint8_t> sites);

}  // namespace voxatlas
