#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "voxatlas/atlas.hpp"
#include "voxatlas/error.hpp"
#include "voxatlas/metrics.hpp"
#include "voxatlas/phantom.hpp"
#include "voxatlas/rng.hpp"
#include "voxatlas/sampling.hpp"

using namespace voxatlas;

namespace {

LabelVolume random_labels(const Geometry& g, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> data(g.voxel_count());
    for (auto& v : data) v = static_cast<std::uint8_t>(rng.below(4));
    return LabelVolume(g, std::move(data));
}

// all vote multisets over labels {0..3} with n voters, as label lists
void all_vote_sets(int n, std::vector<std::vector<std::uint8_t>>& out,
                   std::vector<std::uint8_t> current = {}, int lowest = 0) {
    if (static_cast<int>(current.size()) == n) {
        out.push_back(current);
        return;
    }
    for (int l = lowest; l < 4; ++l) {
        current.push_back(static_cast<std::uint8_t>(l));
        all_vote_sets(n, out, current, l);
        current.pop_back();
    }
}

}  // namespace

TEST_SUITE("atlas") {

TEST_CASE("propagate_labels with identity and integer shift") {
    Geometry g;
    g.dims = {6, 6, 6};
    const LabelVolume l = random_labels(g, 4);

    const LabelVolume same = propagate_labels(l, identity_transform(), g);
    for (std::size_t i = 0; i < l.size(); ++i) CHECK(same[i] == l[i]);

    RigidTransform shift;
    shift.translation = {1.0, 0.0, 0.0};
    const LabelVolume moved = propagate_labels(l, Transform{shift}, g);
    for (int k = 0; k < 6; ++k)
        for (int j = 0; j < 6; ++j) {
            for (int i = 0; i < 5; ++i) CHECK(moved(i, j, k) == l(i + 1, j, k));
            CHECK(moved(5, j, k) == 0);  // border backfill
        }
}

TEST_CASE("propagate_labels matches the nearest-neighbor oracle under random rigids") {
    Geometry g;
    g.dims = {8, 8, 8};
    const LabelVolume l = random_labels(g, 9);
    Rng rng(10);
    for (int t = 0; t < 10; ++t) {
        RigidTransform r;
        r.rotation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
        r.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        r.center = grid_center(g);
        const LabelVolume got = propagate_labels(l, Transform{r}, g);
        const LabelVolume want = oracle::resample_nearest(l, Transform{r}, g);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("mean template: constants, single volume, and the summation oracle") {
    Geometry g;
    g.dims = {4, 4, 4};
    const Volume two = Volume::filled(g, 2.0f);
    const Volume four = Volume::filled(g, 4.0f);
    const Volume mean = build_mean_template(std::vector<Volume>{two, four});
    for (std::size_t i = 0; i < mean.size(); ++i) CHECK(mean[i] == 3.0f);

    const Volume alone = build_mean_template(std::vector<Volume>{two});
    for (std::size_t i = 0; i < alone.size(); ++i) CHECK(alone[i] == two[i]);

    Rng rng(11);
    std::vector<Volume> vols;
    for (int v = 0; v < 5; ++v) {
        std::vector<float> data(g.voxel_count());
        for (float& x : data) x = static_cast<float>(rng.uniform(0, 100));
        vols.emplace_back(g, std::move(data));
    }
    const Volume got = build_mean_template(vols);
    const Volume want = oracle::mean_volume(vols);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-6f);
}

TEST_CASE("mean template is linear in a global intensity scale") {
    Geometry g;
    g.dims = {5, 5, 5};
    Rng rng(12);
    std::vector<Volume> vols, scaled;
    const float a = 2.5f;
    for (int v = 0; v < 3; ++v) {
        std::vector<float> data(g.voxel_count()), sdata(g.voxel_count());
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = static_cast<float>(rng.uniform(0, 10));
            sdata[i] = a * data[i];
        }
        vols.emplace_back(g, std::move(data));
        scaled.emplace_back(g, std::move(sdata));
    }
    const Volume m = build_mean_template(vols);
    const Volume ms = build_mean_template(scaled);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(ms[i] == doctest::Approx(a * m[i]).epsilon(1e-6));
}

TEST_CASE("fusion examples from the vote tables") {
    Geometry g;
    g.dims = {1, 1, 1};
    auto lv = [&](std::uint8_t v) { return LabelVolume(g, {v}); };

    CHECK(fuse_majority(std::vector<LabelVolume>{lv(1), lv(1), lv(2)})[0] == 1);
    CHECK(fuse_majority(std::vector<LabelVolume>{lv(1), lv(2)})[0] == 1);  // tie -> lowest
    CHECK(fuse_majority(std::vector<LabelVolume>{lv(0), lv(3), lv(3)})[0] == 3);

    const auto avg = fuse_average(std::vector<LabelVolume>{lv(1), lv(1), lv(2), lv(3)});
    CHECK(avg[0][0] == 0.0f);
    CHECK(avg[1][0] == 0.5f);
    CHECK(avg[2][0] == 0.25f);
    CHECK(avg[3][0] == 0.25f);

    const auto unanimous = fuse_average(std::vector<LabelVolume>{lv(2), lv(2)});
    CHECK(unanimous[0][0] == 0.0f);
    CHECK(unanimous[2][0] == 1.0f);
}

TEST_CASE("average maps are a per-voxel simplex") {
    Geometry g;
    g.dims = {6, 6, 6};
    std::vector<LabelVolume> vols;
    for (int v = 0; v < 5; ++v) vols.push_back(random_labels(g, 20 + v));
    const auto maps = fuse_average(vols);
    for (std::size_t i = 0; i < maps[0].size(); ++i) {
        float sum = 0.0f;
        for (int c = 0; c < 4; ++c) {
            CHECK(maps[c][i] >= 0.0f);
            CHECK(maps[c][i] <= 1.0f);
            sum += maps[c][i];
        }
        CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
    }
}

TEST_CASE("argmax of fuse_average equals fuse_majority for every vote multiset up to N=5") {
    Geometry g;
    g.dims = {1, 1, 1};
    for (int n = 1; n <= 5; ++n) {
        std::vector<std::vector<std::uint8_t>> sets;
        all_vote_sets(n, sets);
        for (const auto& votes : sets) {
            std::vector<LabelVolume> vols;
            for (std::uint8_t v : votes) vols.push_back(LabelVolume(g, {v}));
            const LabelVolume maj = fuse_majority(vols);
            const auto avg = fuse_average(vols);
            int best = 0;
            for (int c = 1; c < 4; ++c)
                if (avg[c][0] > avg[best][0]) best = c;  // lowest label on ties
            CHECK(int(maj[0]) == best);
        }
    }
}

TEST_CASE("fuse_majority is invariant under input permutation") {
    Geometry g;
    g.dims = {4, 4, 4};
    std::vector<LabelVolume> vols;
    for (int v = 0; v < 4; ++v) vols.push_back(random_labels(g, 30 + v));
    const LabelVolume a = fuse_majority(vols);
    std::reverse(vols.begin(), vols.end());
    const LabelVolume b = fuse_majority(vols);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("fusion rejects mismatched grids") {
    Geometry g1, g2;
    g1.dims = {2, 2, 2};
    g2.dims = {2, 2, 2};
    g2.spacing = {2, 2, 2};
    std::vector<LabelVolume> vols{LabelVolume::filled(g1, 1), LabelVolume::filled(g2, 1)};
    try {
        fuse_majority(vols);
        FAIL("expected alignment error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::alignment);
    }
}

TEST_CASE("build_atlas on two identical pairs is one-hot and degenerate") {
    PhantomSpec spec;
    spec.dims = {24, 24, 24};
    spec.wm_radii = {6.0, 5.0, 5.5};
    spec.gm_radii = {8.0, 7.0, 7.5};
    spec.csf_radii = {10.0, 9.0, 9.5};
    spec.seed = 5;
    auto [img, lab] = generate_phantom(spec);

    std::vector<TrainingCase> cases;
    cases.push_back({"a", img, lab});
    cases.push_back({"b", img, lab});

    RegistrationSettings s;
    s.pyramid_levels = 2;
    s.smoothing_sigmas_mm = {2.0, 0.0};
    s.downsample_factors = {2, 1};
    s.iterations = {40, 20};
    s.sample_fractions = {0.5, 0.2};

    const ProbabilisticAtlas atlas = build_atlas(cases, RegistrationMode::rigid, s, 6);

    CHECK(atlas.provenance.training_ids == std::vector<std::string>{"a", "b"});
    CHECK(atlas.provenance.reference_index == 0);  // identical scores, lowest index
    CHECK(atlas.provenance.registration_mode == "rigid");

    // identical inputs: template equals the shared image up to registration
    // noise, and the probability maps are one-hot almost everywhere
    std::size_t onehot = 0;
    for (std::size_t i = 0; i < atlas.prob_maps[0].size(); ++i) {
        float mx = 0.0f;
        for (int c = 0; c < 4; ++c) mx = std::max(mx, atlas.prob_maps[c][i]);
        if (mx == 1.0f) ++onehot;
    }
    CHECK(double(onehot) / double(atlas.prob_maps[0].size()) > 0.98);

    double max_err = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        max_err = std::max(max_err, std::abs(double(atlas.template_image[i]) - img[i]));
    CHECK(max_err < 10.0);  // registration noise only
}

TEST_CASE("atlas from known-rigid siblings recovers the reference labels") {
    PhantomSpec spec;
    spec.dims = {32, 32, 32};
    spec.wm_radii = {8.0, 6.5, 7.0};
    spec.gm_radii = {10.5, 9.0, 9.5};
    spec.csf_radii = {13.0, 11.0, 12.0};
    spec.noise_sigma = 3.0;
    spec.seed = 21;
    auto [base_img, base_lab] = generate_phantom(spec);

    // three training pairs: the base plus two siblings moved by known rigids
    std::vector<TrainingCase> cases;
    cases.push_back({"base", base_img, base_lab});
    Rng rng(22);
    for (int s = 0; s < 2; ++s) {
        RigidTransform t;
        t.rotation = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
        t.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        t.center = grid_center(base_img.geometry());
        cases.push_back({"sib" + std::to_string(s), resample(base_img, Transform{t}, base_img.geometry()),
                         resample(base_lab, Transform{t}, base_img.geometry(), Interp::nearest)});
    }

    RegistrationSettings s;
    s.pyramid_levels = 2;
    s.smoothing_sigmas_mm = {2.0, 0.0};
    s.downsample_factors = {2, 1};
    s.iterations = {100, 120};
    s.sample_fractions = {0.3, 0.25};

    const ProbabilisticAtlas atlas = build_atlas(cases, RegistrationMode::rigid, s, 23);
    const LabelVolume& reference_labels = cases[atlas.provenance.reference_index].labels;
    for (int cls = 1; cls <= 3; ++cls)
        CHECK(dice(atlas.majority_labels, reference_labels, cls) >= 0.95);
}

TEST_CASE("build_atlas rejects unpaired geometry and too-small sets") {
    Geometry g1, g2;
    g1.dims = {4, 4, 4};
    g2.dims = {5, 4, 4};
    std::vector<TrainingCase> one;
    one.push_back({"x", Volume::filled(g1, 1.0f), LabelVolume::filled(g1, 1)});
    CHECK_THROWS_AS(build_atlas(one, RegistrationMode::rigid), Error);

    std::vector<TrainingCase> bad;
    bad.push_back({"x", Volume::filled(g1, 1.0f), LabelVolume::filled(g2, 1)});
    bad.push_back({"y", Volume::filled(g1, 1.0f), LabelVolume::filled(g1, 1)});
    try {
        build_atlas(bad, RegistrationMode::rigid);
        FAIL("expected pairing error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::pairing);
    }
}

TEST_CASE("segment: identity path reproduces the atlas argmax inside the mask") {
    PhantomSpec spec;
    spec.dims = {24, 24, 24};
    spec.wm_radii = {6.0, 5.0, 5.5};
    spec.gm_radii = {8.0, 7.0, 7.5};
    spec.csf_radii = {10.0, 9.0, 9.5};
    spec.seed = 8;
    auto [img, lab] = generate_phantom(spec);

    ProbabilisticAtlas atlas;
    atlas.template_image = img;
    std::array<std::vector<float>, 4> maps;
    for (auto& m : maps) m.assign(img.size(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i) maps[lab[i]][i] = 1.0f;
    for (int c = 0; c < 4; ++c) atlas.prob_maps[c] = Volume(img.geometry(), std::move(maps[c]));
    atlas.majority_labels = lab;

    RegistrationSettings s;
    s.pyramid_levels = 1;
    s.smoothing_sigmas_mm = {0.0};
    s.downsample_factors = {1};
    s.iterations = {10};
    s.sample_fractions = {0.5};

    // target = template: registration stays at identity, so the output must
    // equal the argmax of the probability maps inside the target mask
    const LabelVolume seg = segment(atlas, img, RegistrationMode::rigid, s, 9);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        if (img[i] > 0.0f)
            CHECK(seg[i] == lab[i]);
        else
            CHECK(seg[i] == 0);  // masked background stays background
    }
}

TEST_CASE("segment output labels stay in the domain and respect the mask") {
    PhantomSpec spec;
    spec.dims = {20, 20, 20};
    spec.wm_radii = {5.0, 4.0, 4.5};
    spec.gm_radii = {7.0, 6.0, 6.5};
    spec.csf_radii = {9.0, 8.0, 8.5};
    spec.seed = 10;
    spec.noise_sigma = 3.0;
    auto [img, lab] = generate_phantom(spec);
    PhantomSpec spec2 = spec;
    spec2.seed = 11;
    spec2.pose_jitter_mm = 1.0;
    auto [img2, lab2] = generate_phantom(spec2);

    std::vector<TrainingCase> cases;
    cases.push_back({"a", img, lab});
    cases.push_back({"b", img2, lab2});

    RegistrationSettings s;
    s.pyramid_levels = 2;
    s.smoothing_sigmas_mm = {2.0, 0.0};
    s.downsample_factors = {2, 1};
    s.iterations = {30, 15};
    s.sample_fractions = {0.5, 0.2};

    const ProbabilisticAtlas atlas = build_atlas(cases, RegistrationMode::rigid, s, 12);
    const SegmentationResult seg = segment_both(atlas, img2, RegistrationMode::rigid, s, 13);
    for (const LabelVolume* l : {&seg.average_route, &seg.majority_route}) {
        for (std::size_t i = 0; i < l->size(); ++i) {
            CHECK((*l)[i] <= 3);
            if (!(img2[i] > 0.0f)) CHECK((*l)[i] == 0);
        }
    }
}

TEST_CASE("atlas save/load round trip") {
    PhantomSpec spec;
    spec.dims = {16, 16, 16};
    spec.wm_radii = {4.0, 3.0, 3.5};
    spec.gm_radii = {5.5, 4.5, 5.0};
    spec.csf_radii = {7.0, 6.0, 6.5};
    spec.seed = 14;
    auto [img, lab] = generate_phantom(spec);

    ProbabilisticAtlas atlas;
    atlas.template_image = img;
    std::array<std::vector<float>, 4> maps;
    for (auto& m : maps) m.assign(img.size(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i) maps[lab[i]][i] = 1.0f;
    for (int c = 0; c < 4; ++c) atlas.prob_maps[c] = Volume(img.geometry(), std::move(maps[c]));
    atlas.majority_labels = lab;
    atlas.provenance.training_ids = {"p", "q"};
    atlas.provenance.reference_index = 1;
    atlas.provenance.registration_mode = "affine";
    atlas.provenance.seed = 99;

    const auto dir = std::filesystem::temp_directory_path() / "voxatlas_atlas_test";
    save_atlas(atlas, dir);
    const ProbabilisticAtlas loaded = load_atlas(dir);
    CHECK(loaded.provenance.training_ids == atlas.provenance.training_ids);
    CHECK(loaded.provenance.reference_index == 1);
    CHECK(loaded.provenance.registration_mode == "affine");
    CHECK(loaded.provenance.seed == 99);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(loaded.template_image[i] == atlas.template_image[i]);
        CHECK(loaded.majority_labels[i] == atlas.majority_labels[i]);
        for (int c = 0; c < 4; ++c) CHECK(loaded.prob_maps[c][i] == atlas.prob_maps[c][i]);
    }
}

}  // TEST_SUITE
