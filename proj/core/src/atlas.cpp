#include "voxatlas/atlas.hpp"

#include <algorithm>
#include <fstream>
#include <future>

#include <json.hpp>

#include "voxatlas/error.hpp"
#include "voxatlas/mutual_information.hpp"
#include "voxatlas/nifti.hpp"
#include "voxatlas/rng.hpp"
#include "voxatlas/sampling.hpp"

namespace voxatlas {

namespace {

void require_common_grid(std::span<const Geometry> geoms) {
    for (std::size_t i = 1; i < geoms.size(); ++i)
        if (!geoms[0].same_grid(geoms[i]))
            fail(errc::alignment, "fusion: input " + std::to_string(i) + " is on a different grid");
}

const char* kProbNames[kNumTissueClasses] = {"prob_bg", "prob_csf", "prob_gm", "prob_wm"};

}  // namespace

LabelVolume propagate_labels(const LabelVolume& labels, const Transform& t, const Geometry& reference) {
    return resample(labels, t, reference, Interp::nearest);
}

Volume build_mean_template(std::span<const Volume> registered) {
    if (registered.empty()) fail(errc::settings, "mean template: need at least one volume");
    std::vector<Geometry> geoms;
    for (const Volume& v : registered) geoms.push_back(v.geometry());
    require_common_grid(geoms);

    const std::size_t n = registered[0].size();
    std::vector<double> acc(n, 0.0);
    for (const Volume& v : registered)
        for (std::size_t i = 0; i < n; ++i) acc[i] += v[i];

    std::vector<float> mean(n);
    const double inv = 1.0 / static_cast<double>(registered.size());
    for (std::size_t i = 0; i < n; ++i) mean[i] = static_cast<float>(acc[i] * inv);
    return Volume(registered[0].geometry(), std::move(mean));
}

LabelVolume fuse_majority(std::span<const LabelVolume> propagated) {
    if (propagated.empty()) fail(errc::settings, "fuse_majority: need at least one label volume");
    std::vector<Geometry> geoms;
    for (const LabelVolume& l : propagated) geoms.push_back(l.geometry());
    require_common_grid(geoms);

    const std::size_t n = propagated[0].size();
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        int votes[kNumTissueClasses] = {0, 0, 0, 0};
        for (const LabelVolume& l : propagated) ++votes[l[i]];
        int best = 0;
        for (int c = 1; c < kNumTissueClasses; ++c)
            if (votes[c] > votes[best]) best = c;  // strict: ties keep the lowest label
        out[i] = static_cast<std::uint8_t>(best);
    }
    return LabelVolume(propagated[0].geometry(), std::move(out));
}

std::array<Volume, kNumTissueClasses> fuse_average(std::span<const LabelVolume> propagated) {
    if (propagated.empty()) fail(errc::settings, "fuse_average: need at least one label volume");
    std::vector<Geometry> geoms;
    for (const LabelVolume& l : propagated) geoms.push_back(l.geometry());
    require_common_grid(geoms);

    const std::size_t n = propagated[0].size();
    std::array<std::vector<float>, kNumTissueClasses> maps;
    for (auto& m : maps) m.assign(n, 0.0f);

    const float inv = 1.0f / static_cast<float>(propagated.size());
    for (std::size_t i = 0; i < n; ++i) {
        int votes[kNumTissueClasses] = {0, 0, 0, 0};
        for (const LabelVolume& l : propagated) ++votes[l[i]];
        for (int c = 0; c < kNumTissueClasses; ++c)
            maps[c][i] = static_cast<float>(votes[c]) * inv;
    }

    std::array<Volume, kNumTissueClasses> out;
    for (int c = 0; c < kNumTissueClasses; ++c)
        out[c] = Volume(propagated[0].geometry(), std::move(maps[c]));
    return out;
}

ProbabilisticAtlas build_atlas(std::span<const TrainingCase> training, RegistrationMode mode,
                               const RegistrationSettings& settings, std::uint64_t seed) {
    if (training.size() < 2) fail(errc::settings, "build_atlas: need at least two training pairs");
    for (const TrainingCase& c : training)
        if (!c.image.geometry().same_grid(c.labels.geometry()))
            fail(errc::pairing, "build_atlas: case \"" + c.id + "\": labels do not match image geometry");

    std::vector<Volume> images;
    images.reserve(training.size());
    for (const TrainingCase& c : training) images.push_back(c.image);
    const std::size_t ref = select_reference(images, settings.mi_bins);
    const Volume& fixed = training[ref].image;
    const Geometry& ref_geom = fixed.geometry();

    // register every non-reference case to the reference, concurrently
    std::vector<Transform> transforms(training.size(), identity_transform());
    std::vector<std::future<Transform>> jobs(training.size());
    for (std::size_t i = 0; i < training.size(); ++i) {
        if (i == ref) continue;
        jobs[i] = std::async(std::launch::async, [&, i] {
            return register_volumes(fixed, training[i].image, mode, settings, derive_seed(seed, i));
        });
    }
    for (std::size_t i = 0; i < training.size(); ++i) {
        if (i == ref) continue;
        try {
            transforms[i] = jobs[i].get();
        } catch (const Error& e) {
            fail(e.code(), "build_atlas: case \"" + training[i].id + "\": " + e.what());
        }
    }

    std::vector<Volume> registered;
    std::vector<LabelVolume> propagated;
    registered.reserve(training.size());
    propagated.reserve(training.size());
    for (std::size_t i = 0; i < training.size(); ++i) {
        registered.push_back(resample(training[i].image, transforms[i], ref_geom, Interp::trilinear));
        propagated.push_back(propagate_labels(training[i].labels, transforms[i], ref_geom));
    }

    ProbabilisticAtlas atlas;
    atlas.template_image = build_mean_template(registered);
    atlas.prob_maps = fuse_average(propagated);
    atlas.majority_labels = fuse_majority(propagated);

    // consistency: both fusions come from the same votes, so the majority
    // label must be the probability argmax under the lowest-label tie-break
    for (std::size_t i = 0; i < atlas.majority_labels.size(); ++i) {
        int best = 0;
        for (int c = 1; c < kNumTissueClasses; ++c)
            if (atlas.prob_maps[c][i] > atlas.prob_maps[best][i]) best = c;
        if (best != atlas.majority_labels[i])
            fail(errc::numerical_failure,
                 "build_atlas: majority/average fusion disagree at linear index " + std::to_string(i));
    }

    for (const TrainingCase& c : training) atlas.provenance.training_ids.push_back(c.id);
    atlas.provenance.reference_index = ref;
    atlas.provenance.registration_mode = to_string(mode);
    atlas.provenance.seed = seed;
    return atlas;
}

SegmentationResult segment_both(const ProbabilisticAtlas& atlas, const Volume& target,
                                RegistrationMode mode, const RegistrationSettings& settings,
                                std::uint64_t seed) {
    const Transform t = register_volumes(target, atlas.template_image, mode, settings, seed);
    const Geometry& g = target.geometry();

    std::array<Volume, kNumTissueClasses> warped;
    for (int c = 0; c < kNumTissueClasses; ++c)
        warped[c] = resample(atlas.prob_maps[c], t, g, Interp::trilinear);

    std::vector<std::uint8_t> out(target.size(), 0);
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (!(target[i] > 0.0f)) continue;  // outside the target mask stays background
        // renormalize: interpolation can break the per-voxel simplex
        double p[kNumTissueClasses];
        double sum = 0.0;
        for (int c = 0; c < kNumTissueClasses; ++c) {
            p[c] = std::max(0.0, static_cast<double>(warped[c][i]));
            sum += p[c];
        }
        int best = 0;
        if (sum > 0.0) {
            for (int c = 1; c < kNumTissueClasses; ++c)
                if (p[c] > p[best]) best = c;  // lowest label wins ties
        }
        out[i] = static_cast<std::uint8_t>(best);
    }

    const LabelVolume warped_majority = resample(atlas.majority_labels, t, g, Interp::nearest);
    std::vector<std::uint8_t> majority(target.size(), 0);
    for (std::size_t i = 0; i < target.size(); ++i)
        if (target[i] > 0.0f) majority[i] = warped_majority[i];

    SegmentationResult result;
    result.average_route = LabelVolume(g, std::move(out));
    result.majority_route = LabelVolume(g, std::move(majority));
    result.transform = t;
    return result;
}

LabelVolume segment(const ProbabilisticAtlas& atlas, const Volume& target, RegistrationMode mode,
                    const RegistrationSettings& settings, std::uint64_t seed) {
    return segment_both(atlas, target, mode, settings, seed).average_route;
}

void save_atlas(const ProbabilisticAtlas& atlas, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_volume(atlas.template_image, dir / "template.nii.gz");
    for (int c = 0; c < kNumTissueClasses; ++c)
        write_volume(atlas.prob_maps[c], dir / (std::string(kProbNames[c]) + ".nii.gz"));
    write_labels(atlas.majority_labels, dir / "majority.nii.gz");

    nlohmann::json j{{"training_ids", atlas.provenance.training_ids},
                     {"reference_index", atlas.provenance.reference_index},
                     {"registration_mode", atlas.provenance.registration_mode},
                     {"seed", atlas.provenance.seed}};
    std::ofstream out(dir / "provenance.json");
    if (!out) fail(errc::io, "cannot write " + (dir / "provenance.json").string());
    out << j.dump(2) << "\n";
}

ProbabilisticAtlas load_atlas(const std::filesystem::path& dir) {
    ProbabilisticAtlas atlas;
    atlas.template_image = read_volume(dir / "template.nii.gz");
    for (int c = 0; c < kNumTissueClasses; ++c)
        atlas.prob_maps[c] = read_volume(dir / (std::string(kProbNames[c]) + ".nii.gz"));
    atlas.majority_labels = read_labels(dir / "majority.nii.gz");

    std::ifstream in(dir / "provenance.json");
    if (!in) fail(errc::io, "cannot read " + (dir / "provenance.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format, (dir / "provenance.json").string() + ": " + e.what());
    }
    atlas.provenance.training_ids = j.value("training_ids", std::vector<std::string>{});
    atlas.provenance.reference_index = j.value("reference_index", std::size_t{0});
    atlas.provenance.registration_mode = j.value("registration_mode", std::string{});
    atlas.provenance.seed = j.value("seed", std::uint64_t{0});
    return atlas;
}

}  // namespace voxatlas
