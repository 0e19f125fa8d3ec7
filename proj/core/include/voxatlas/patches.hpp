#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxatlas/volume.hpp"

namespace voxatlas {

struct PatchExtractionSettings {
    std::array<int, 2> size{32, 32};
    std::array<int, 2> stride{32, 32};
    int axis = 2;               // slicing axis, default axial (z)
    int min_tissue_voxels = 1;  // keep a tile when its footprint holds at least this many nonzero labels

    void validate() const;
};

struct Patch {
    std::vector<float> intensities;    // size[0]*size[1], row-major, zero-padded at borders
    std::vector<std::uint8_t> labels;  // geometry-matched label tile
    int slice = 0;
    int row = 0;  // tile offset within the slice
    int col = 0;
};

struct PatchSet {
    PatchExtractionSettings settings;
    std::array<int, 2> plane_dims{0, 0};  // rows, cols of each slice
    int slices = 0;
    std::string source_case;
    std::vector<Patch> patches;  // ordered by (slice, row, col)
};

/// Tiles every slice along the axis with the given stride and keeps the tiles
/// whose footprint intersects the tissue mask (labels != 0). Border tiles are
/// zero-padded to full size.
PatchSet extract_patches(const Volume& volume, const LabelVolume& labels,
                         const PatchExtractionSettings& settings = {});

/// All tiles of one slice with their retained flag; extract_patches keeps the
/// retained ones. Exposed so the tiling partition can be verified.
struct SliceTile {
    Patch patch;
    bool retained = false;
};
std::vector<SliceTile> tile_slice(const Volume& volume, const LabelVolume& labels, int slice,
                                  const PatchExtractionSettings& settings);

/// One raw patch container (float32 intensities then uint8 labels per patch)
/// plus a JSON manifest with counts, offsets, and provenance.
void save_patches(const PatchSet& set, const std::filesystem::path& dir);

}  // namespace voxatlas
