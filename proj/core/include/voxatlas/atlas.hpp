#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxatlas/registration.hpp"
#include "voxatlas/volume.hpp"

namespace voxatlas {

struct TrainingCase {
    std::string id;
    Volume image;
    LabelVolume labels;
};

/// Mean intensity template plus per-class probability maps built from
/// co-registered labeled volumes. Immutable after build.
struct ProbabilisticAtlas {
    Volume template_image;
    std::array<Volume, kNumTissueClasses> prob_maps;  // BG, CSF, GM, WM
    LabelVolume majority_labels;

    struct Provenance {
        std::vector<std::string> training_ids;
        std::size_t reference_index = 0;
        std::string registration_mode;
        std::uint64_t seed = 0;
    } provenance;
};

/// Nearest-neighbor warp of a label map onto the reference grid using the
/// transform obtained from registering the reference image (fixed) to the
/// labels' image (moving).
LabelVolume propagate_labels(const LabelVolume& labels, const Transform& t, const Geometry& reference);

/// Voxel-wise arithmetic mean of co-registered volumes.
Volume build_mean_template(std::span<const Volume> registered);

/// Per-voxel modal label; ties broken by the lowest label value.
LabelVolume fuse_majority(std::span<const LabelVolume> propagated);

/// Per-voxel label frequencies; the four maps sum to one everywhere.
std::array<Volume, kNumTissueClasses> fuse_average(std::span<const LabelVolume> propagated);

/// Full atlas construction: picks the reference by pairwise mutual
/// information, registers every other image to it, propagates labels, and
/// fuses. The reference participates in template and fusion via the identity
/// transform. Pairs are registered concurrently.
ProbabilisticAtlas build_atlas(std::span<const TrainingCase> training, RegistrationMode mode,
                               const RegistrationSettings& settings = {}, std::uint64_t seed = 0);

/// Registers the atlas template onto the target (template as moving image),
/// warps the probability maps with trilinear interpolation plus per-voxel
/// renormalization, and assigns the argmax class (lowest label on ties)
/// inside the target mask {intensity > 0}; background elsewhere.
LabelVolume segment(const ProbabilisticAtlas& atlas, const Volume& target, RegistrationMode mode,
                    const RegistrationSettings& settings = {}, std::uint64_t seed = 0);

/// Both fusion routes from one registration: the probability-map argmax
/// (averaging) and the warped majority labels, plus the transform used.
struct SegmentationResult {
    LabelVolume average_route;
    LabelVolume majority_route;
    Transform transform;
};
SegmentationResult segment_both(const ProbabilisticAtlas& atlas, const Volume& target,
                                RegistrationMode mode, const RegistrationSettings& settings = {},
                                std::uint64_t seed = 0);

/// Atlas directory layout: template.nii.gz, prob_{bg,csf,gm,wm}.nii.gz,
/// majority.nii.gz, provenance.json.
void save_atlas(const ProbabilisticAtlas& atlas, const std::filesystem::path& dir);
ProbabilisticAtlas load_atlas(const std::filesystem::path& dir);

}  // namespace voxatlas
