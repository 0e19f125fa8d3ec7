#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxatlas/atlas.hpp"
#include "voxatlas/bias_field.hpp"
#include "voxatlas/diffusion.hpp"
#include "voxatlas/registration.hpp"

namespace voxatlas {

struct PreprocessConfig {
    bool skip_n4 = false;
    bool skip_diffusion = false;
    N4Settings n4;
    DiffusionSettings diffusion;
};

/// N4 (mask {intensity > 0}) followed by anisotropic diffusion, matching the
/// preprocessing order of the rest of the toolkit. Returns the bias field
/// when N4 ran and a field sink was requested.
Volume preprocess_volume(const Volume& input, const PreprocessConfig& config,
                         Volume* bias_field_out = nullptr);

/// Fully enumerated run configuration. Defaults are materialized into the
/// persisted copy so a run is reproducible from (config, seed) alone.
struct PipelineConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;  // recorded, unused by the atlas path
    std::vector<std::string> test_ids;
    PreprocessConfig preprocess;
    RegistrationMode mode = RegistrationMode::affine;
    RegistrationSettings registration;
    std::string fusion = "average";  // primary report: "average" or "majority"
    std::uint64_t seed = 0;

    /// Split hygiene and file existence; throws errc::config.
    void validate() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);

/// Dataset naming convention: <root>/<id>.nii[.gz] and <root>/<id>_seg.nii[.gz].
std::filesystem::path find_case_image(const std::filesystem::path& root, const std::string& id);
std::filesystem::path find_case_labels(const std::filesystem::path& root, const std::string& id);

/// preprocess -> build atlas from the train split -> segment the test split
/// (both fusion routes) -> evaluate against ground truth -> CSV reports.
/// Per-case failures are recorded in errors.json and skipped; the return
/// value is nonzero when any case failed. All artifacts land under
/// config.output_dir and a rerun with identical config and seed reproduces
/// them byte for byte.
int run_pipeline(const PipelineConfig& config);

}  // namespace voxatlas
