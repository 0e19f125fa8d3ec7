#include "voxatlas/patches.hpp"

#include <fstream>

#include <json.hpp>

#include "voxatlas/error.hpp"

namespace voxatlas {

namespace {

// Plane axes for slicing axis a: rows along the higher remaining axis, cols
// along the lower, so axial (z) slices have rows = y and cols = x.
void plane_axes(int axis, int& row_axis, int& col_axis) {
    switch (axis) {
        case 0: row_axis = 2; col_axis = 1; break;
        case 1: row_axis = 2; col_axis = 0; break;
        default: row_axis = 1; col_axis = 0; break;
    }
}

}  // namespace

void PatchExtractionSettings::validate() const {
    if (size[0] < 1 || size[1] < 1) fail(errc::settings, "patches: size must be positive");
    if (stride[0] < 1 || stride[1] < 1) fail(errc::settings, "patches: stride must be positive");
    if (axis < 0 || axis > 2) fail(errc::settings, "patches: axis must be 0, 1, or 2");
    if (min_tissue_voxels < 1) fail(errc::settings, "patches: min_tissue_voxels must be >= 1");
}

std::vector<SliceTile> tile_slice(const Volume& volume, const LabelVolume& labels, int slice,
                                  const PatchExtractionSettings& settings) {
    const Geometry& g = volume.geometry();
    int row_axis, col_axis;
    plane_axes(settings.axis, row_axis, col_axis);
    const int rows = g.dims[row_axis];
    const int cols = g.dims[col_axis];

    auto voxel_at = [&](int r, int c, int idx[3]) {
        idx[settings.axis] = slice;
        idx[row_axis] = r;
        idx[col_axis] = c;
    };

    std::vector<SliceTile> tiles;
    for (int r0 = 0; r0 < rows; r0 += settings.stride[0]) {
        for (int c0 = 0; c0 < cols; c0 += settings.stride[1]) {
            SliceTile tile;
            tile.patch.slice = slice;
            tile.patch.row = r0;
            tile.patch.col = c0;
            tile.patch.intensities.assign(static_cast<std::size_t>(settings.size[0]) * settings.size[1], 0.0f);
            tile.patch.labels.assign(tile.patch.intensities.size(), 0);

            int tissue = 0;
            for (int r = 0; r < settings.size[0]; ++r) {
                const int rr = r0 + r;
                if (rr >= rows) break;
                for (int c = 0; c < settings.size[1]; ++c) {
                    const int cc = c0 + c;
                    if (cc >= cols) break;
                    int idx[3];
                    voxel_at(rr, cc, idx);
                    const std::size_t flat = linear_index(g, idx[0], idx[1], idx[2]);
                    const std::size_t out = static_cast<std::size_t>(r) * settings.size[1] + c;
                    tile.patch.intensities[out] = volume[flat];
                    tile.patch.labels[out] = labels[flat];
                    if (labels[flat] != 0) ++tissue;
                }
            }
            tile.retained = tissue >= settings.min_tissue_voxels;
            tiles.push_back(std::move(tile));
        }
    }
    return tiles;
}

PatchSet extract_patches(const Volume& volume, const LabelVolume& labels,
                         const PatchExtractionSettings& settings) {
    settings.validate();
    if (!volume.geometry().same_grid(labels.geometry()))
        fail(errc::pairing, "patches: label geometry does not match volume");

    const Geometry& g = volume.geometry();
    int row_axis, col_axis;
    plane_axes(settings.axis, row_axis, col_axis);

    PatchSet set;
    set.settings = settings;
    set.plane_dims = {g.dims[row_axis], g.dims[col_axis]};
    set.slices = g.dims[settings.axis];
    for (int s = 0; s < set.slices; ++s) {
        for (SliceTile& tile : tile_slice(volume, labels, s, settings))
            if (tile.retained) set.patches.push_back(std::move(tile.patch));
    }
    return set;
}

void save_patches(const PatchSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t tile_px = static_cast<std::size_t>(set.settings.size[0]) * set.settings.size[1];

    const auto bin_path = dir / "patches.bin";
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) fail(errc::io, "cannot write " + bin_path.string());
    for (const Patch& p : set.patches) {
        bin.write(reinterpret_cast<const char*>(p.intensities.data()),
                  static_cast<std::streamsize>(tile_px * sizeof(float)));
        bin.write(reinterpret_cast<const char*>(p.labels.data()), static_cast<std::streamsize>(tile_px));
    }
    if (!bin) fail(errc::io, "failed writing " + bin_path.string());

    nlohmann::json offsets = nlohmann::json::array();
    for (const Patch& p : set.patches)
        offsets.push_back({{"slice", p.slice}, {"row", p.row}, {"col", p.col}});
    nlohmann::json manifest{
        {"source_case", set.source_case},
        {"patch_size", set.settings.size},
        {"stride", set.settings.stride},
        {"axis", set.settings.axis},
        {"min_tissue_voxels", set.settings.min_tissue_voxels},
        {"plane_dims", set.plane_dims},
        {"slices", set.slices},
        {"count", set.patches.size()},
        {"record_bytes", tile_px * sizeof(float) + tile_px},
        {"layout", "per patch: float32 intensities then uint8 labels, row-major"},
        {"offsets", offsets},
    };
    std::ofstream mf(dir / "manifest.json");
    if (!mf) fail(errc::io, "cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
}

}  // namespace voxatlas
