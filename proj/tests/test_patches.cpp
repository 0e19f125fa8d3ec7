#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "voxatlas/error.hpp"
#include "voxatlas/patches.hpp"
#include "voxatlas/rng.hpp"

using namespace voxatlas;

namespace {

// single 64x64 axial slice with the given label everywhere
std::pair<Volume, LabelVolume> flat_slice(std::uint8_t label, int nx = 64, int ny = 64) {
    Geometry g;
    g.dims = {nx, ny, 1};
    Volume v = Volume::filled(g, label ? 100.0f : 0.0f);
    LabelVolume l = LabelVolume::filled(g, label);
    return {std::move(v), std::move(l)};
}

}  // namespace

TEST_SUITE("patches") {

TEST_CASE("all-background volume yields no patches") {
    auto [v, l] = flat_slice(0);
    const PatchSet set = extract_patches(v, l);
    CHECK(set.patches.empty());
}

TEST_CASE("full-tissue 64x64 slice tiles into exactly 4 patches") {
    auto [v, l] = flat_slice(2);
    const PatchSet set = extract_patches(v, l);
    CHECK(set.patches.size() == 4);
    // offsets are the exact 32-grid
    std::set<std::pair<int, int>> offsets;
    for (const Patch& p : set.patches) offsets.insert({p.row, p.col});
    CHECK(offsets == std::set<std::pair<int, int>>{{0, 0}, {0, 32}, {32, 0}, {32, 32}});
}

TEST_CASE("mask confined to one quadrant keeps one patch") {
    Geometry g;
    g.dims = {64, 64, 1};
    std::vector<float> vals(g.voxel_count(), 0.0f);
    std::vector<std::uint8_t> labs(g.voxel_count(), 0);
    // tissue only in the [0,32) x [0,32) quadrant (x = cols, y = rows)
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            vals[linear_index(g, i, j, 0)] = 80.0f;
            labs[linear_index(g, i, j, 0)] = 3;
        }
    const PatchSet set = extract_patches(Volume(g, vals), LabelVolume(g, labs));
    REQUIRE(set.patches.size() == 1);
    CHECK(set.patches[0].row == 0);
    CHECK(set.patches[0].col == 0);
}

TEST_CASE("every retained patch has tissue; every discarded tile has none") {
    Geometry g;
    g.dims = {48, 40, 3};
    Rng rng(5);
    std::vector<float> vals(g.voxel_count(), 0.0f);
    std::vector<std::uint8_t> labs(g.voxel_count(), 0);
    for (std::size_t i = 0; i < labs.size(); ++i) {
        if (rng.uniform() < 0.1) {
            labs[i] = static_cast<std::uint8_t>(1 + rng.below(3));
            vals[i] = 50.0f;
        }
    }
    const Volume v(g, vals);
    const LabelVolume l(g, labs);
    const PatchExtractionSettings settings;
    for (int s = 0; s < 3; ++s) {
        for (const SliceTile& tile : tile_slice(v, l, s, settings)) {
            int tissue = 0;
            for (std::uint8_t x : tile.patch.labels) tissue += x != 0;
            if (tile.retained)
                CHECK(tissue >= 1);
            else
                CHECK(tissue == 0);
        }
    }
}

TEST_CASE("tiles partition each slice: reassembly is exact") {
    Geometry g;
    g.dims = {50, 34, 2};  // deliberately not multiples of 32
    Rng rng(6);
    std::vector<float> vals(g.voxel_count());
    std::vector<std::uint8_t> labs(g.voxel_count());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        vals[i] = static_cast<float>(rng.uniform(0, 10));
        labs[i] = static_cast<std::uint8_t>(rng.below(4));
    }
    const Volume v(g, vals);
    const LabelVolume l(g, labs);
    PatchExtractionSettings settings;  // size 32, stride 32: a partition

    for (int s = 0; s < 2; ++s) {
        std::vector<float> rebuilt(static_cast<std::size_t>(g.dims[0]) * g.dims[1], -1.0f);
        for (const SliceTile& tile : tile_slice(v, l, s, settings)) {
            for (int r = 0; r < settings.size[0]; ++r)
                for (int c = 0; c < settings.size[1]; ++c) {
                    const int rr = tile.patch.row + r;
                    const int cc = tile.patch.col + c;
                    if (rr >= g.dims[1] || cc >= g.dims[0]) continue;  // zero padding region
                    rebuilt[static_cast<std::size_t>(rr) * g.dims[0] + cc] =
                        tile.patch.intensities[static_cast<std::size_t>(r) * settings.size[1] + c];
                }
        }
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                CHECK(rebuilt[static_cast<std::size_t>(j) * g.dims[0] + i] == v(i, j, s));
    }
}

TEST_CASE("patch count upper bound") {
    Geometry g;
    g.dims = {70, 33, 4};
    Volume v = Volume::filled(g, 1.0f);
    LabelVolume l = LabelVolume::filled(g, 1);
    const PatchSet set = extract_patches(v, l);
    const int per_slice = ((33 + 31) / 32) * ((70 + 31) / 32);
    CHECK(set.patches.size() <= static_cast<std::size_t>(per_slice) * 4);
    CHECK(set.patches.size() == static_cast<std::size_t>(per_slice) * 4);  // all tissue here
}

TEST_CASE("alternate slicing axis") {
    Geometry g;
    g.dims = {8, 64, 64};
    Volume v = Volume::filled(g, 1.0f);
    LabelVolume l = LabelVolume::filled(g, 2);
    PatchExtractionSettings s;
    s.axis = 0;  // sagittal
    const PatchSet set = extract_patches(v, l, s);
    CHECK(set.slices == 8);
    CHECK(set.patches.size() == 8 * 4);
}

TEST_CASE("geometry mismatch is a pairing error") {
    Geometry g1, g2;
    g1.dims = {8, 8, 2};
    g2.dims = {8, 8, 3};
    try {
        extract_patches(Volume::filled(g1, 1.0f), LabelVolume::filled(g2, 1));
        FAIL("expected pairing error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::pairing);
    }
}

TEST_CASE("save_patches writes the container and manifest") {
    auto [v, l] = flat_slice(1);
    PatchSet set = extract_patches(v, l);
    set.source_case = "demo";
    const auto dir = std::filesystem::temp_directory_path() / "voxatlas_patches_test";
    save_patches(set, dir);

    CHECK(std::filesystem::exists(dir / "patches.bin"));
    const auto bytes = std::filesystem::file_size(dir / "patches.bin");
    CHECK(bytes == set.patches.size() * (32 * 32 * 5));  // 4B float + 1B label per voxel

    std::ifstream mf(dir / "manifest.json");
    const std::string manifest((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    CHECK(manifest.find("\"count\": 4") != std::string::npos);
    CHECK(manifest.find("\"source_case\": \"demo\"") != std::string::npos);
}

}  // TEST_SUITE
