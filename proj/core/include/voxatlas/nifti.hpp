#pragma once

#include <filesystem>

#include "voxatlas/volume.hpp"

namespace voxatlas {

/// NIfTI-1 reader. Plain and gzip containers are auto-detected by the
/// 0x1F 0x8B prefix. Scalar datatypes uint8/int16/uint16/int32/float32/float64
/// are converted to internal float with scl_slope/scl_inter applied when
/// scl_slope != 0. Geometry comes from sform when sform_code > 0, else qform,
/// else pixdim spacing alone.
Volume read_volume(const std::filesystem::path& path);

/// Reads a label map; values must be integral and within {0,1,2,3}
/// (errc::label_domain otherwise).
LabelVolume read_labels(const std::filesystem::path& path);

/// Writes float32 voxel data with an sform carrying the geometry. Paths
/// ending in .gz are gzip-compressed.
void write_volume(const Volume& v, const std::filesystem::path& path);

/// Labels are written as uint8.
void write_labels(const LabelVolume& labels, const std::filesystem::path& path);

}  // namespace voxatlas
