#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxatlas/atlas.hpp"
#include "voxatlas/error.hpp"
#include "voxatlas/metrics.hpp"
#include "voxatlas/nifti.hpp"
#include "voxatlas/patches.hpp"
#include "voxatlas/phantom.hpp"
#include "voxatlas/pipeline.hpp"
#include "voxatlas/settings_json.hpp"

namespace fs = std::filesystem;
using namespace voxatlas;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(errc::config, path.string() + ": " + e.what());
    }
    return j;
}

// optional per-subcommand JSON defaults; explicit flags win
struct ConfigOverlay {
    std::string path;
    json loaded = json::object();
    void load() {
        if (!path.empty()) loaded = load_json_file(path);
    }
};

int axis_from_name(const std::string& axis) {
    if (axis == "x" || axis == "0") return 0;
    if (axis == "y" || axis == "1") return 1;
    if (axis == "z" || axis == "2") return 2;
    fail(errc::config, "axis must be x, y, or z");
}

// dataset ids in a directory: every <id>.nii[.gz] with a matching <id>_seg
std::vector<std::string> discover_cases(const fs::path& dir, bool require_labels) {
    std::set<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        for (const char* ext : {".nii.gz", ".nii"}) {
            if (name.size() > std::strlen(ext) && name.compare(name.size() - std::strlen(ext), std::strlen(ext), ext) == 0) {
                name = name.substr(0, name.size() - std::strlen(ext));
                break;
            }
        }
        if (name == entry.path().filename().string()) continue;  // not a nifti
        if (name.size() > 4 && name.compare(name.size() - 4, 4, "_seg") == 0) continue;
        if (require_labels) {
            try {
                find_case_labels(dir, name);
            } catch (const Error&) {
                continue;
            }
        }
        ids.insert(name);
    }
    return {ids.begin(), ids.end()};
}

int run_evaluate_batch(const fs::path& pred_dir, const fs::path& gt_dir, const std::string& csv,
                       bool surface) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        std::string name = entry.path().filename().string();
        for (const char* ext : {".nii.gz", ".nii"}) {
            const std::size_t n = std::strlen(ext);
            if (name.size() > n && name.compare(name.size() - n, n, ext) == 0) {
                ids.push_back(name.substr(0, name.size() - n));
                break;
            }
        }
    }
    std::sort(ids.begin(), ids.end());

    std::vector<std::string> scored;
    std::vector<MetricsReport> reports;
    const HausdorffVariant variant = surface ? HausdorffVariant::surface : HausdorffVariant::full_set;
    for (const std::string& id : ids) {
        const LabelVolume pred = read_labels(find_case_image(pred_dir, id));
        const LabelVolume gt = read_labels(find_case_image(gt_dir, id));
        reports.push_back(evaluate(pred, gt, variant));
        scored.push_back(id);
    }
    if (!csv.empty()) write_metrics_csv(csv, scored, reports);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const MetricsReport& r = reports[i];
        std::printf("%s: dsc csf=%.4f gm=%.4f wm=%.4f mean=%.4f\n", scored[i].c_str(),
                    r.tissue[0].dsc.value_or(-1), r.tissue[1].dsc.value_or(-1),
                    r.tissue[2].dsc.value_or(-1), r.mean.dsc.value_or(-1));
    }
    return scored.empty() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxatlas: probabilistic-atlas brain tissue segmentation toolkit"};
    app.require_subcommand(1);

    // ---- preprocess ----
    auto* cmd_pre = app.add_subcommand("preprocess", "N4 bias correction followed by anisotropic diffusion");
    std::string pre_in, pre_out, pre_field;
    PreprocessConfig pre_cfg;
    std::string pre_conduction = "exponential";
    ConfigOverlay pre_overlay;
    cmd_pre->add_option("--input", pre_in, "input volume (.nii/.nii.gz)")->required();
    cmd_pre->add_option("--output", pre_out, "output volume")->required();
    cmd_pre->add_option("--save-field", pre_field, "write the estimated bias field here");
    cmd_pre->add_flag("--skip-n4", pre_cfg.skip_n4, "skip bias correction");
    cmd_pre->add_flag("--skip-diffusion", pre_cfg.skip_diffusion, "skip denoising");
    cmd_pre->add_option("--n4-levels", pre_cfg.n4.fitting_levels, "N4 fitting levels");
    cmd_pre->add_option("--n4-iterations", pre_cfg.n4.max_iterations_per_level, "N4 iterations per level");
    cmd_pre->add_option("--n4-threshold", pre_cfg.n4.convergence_threshold, "N4 convergence threshold");
    cmd_pre->add_option("--n4-bins", pre_cfg.n4.histogram_bins, "N4 histogram bins");
    cmd_pre->add_option("--n4-grid", pre_cfg.n4.bspline_grid, "N4 coarsest control points per axis");
    cmd_pre->add_option("--n4-wiener-noise", pre_cfg.n4.wiener_noise, "N4 Wiener regularizer");
    cmd_pre->add_option("--n4-fwhm", pre_cfg.n4.fwhm, "N4 histogram-sharpening FWHM");
    cmd_pre->add_option("--diffusion-iterations", pre_cfg.diffusion.iterations, "diffusion iterations");
    cmd_pre->add_option("--kappa", pre_cfg.diffusion.kappa, "conduction threshold");
    cmd_pre->add_option("--dt", pre_cfg.diffusion.dt, "diffusion time step (<= 1/6)");
    cmd_pre->add_option("--conduction", pre_conduction, "exponential|rational");
    cmd_pre->add_option("--config", pre_overlay.path, "JSON with n4/diffusion settings");

    // ---- register ----
    auto* cmd_reg = app.add_subcommand("register", "pairwise mutual-information registration");
    std::string reg_fixed, reg_moving, reg_out, reg_mode = "affine";
    std::uint64_t reg_seed = 0;
    ConfigOverlay reg_overlay;
    cmd_reg->add_option("--fixed", reg_fixed, "fixed image")->required();
    cmd_reg->add_option("--moving", reg_moving, "moving image")->required();
    cmd_reg->add_option("--mode", reg_mode, "rigid|affine|affine_bspline");
    cmd_reg->add_option("--out", reg_out, "output transform JSON")->required();
    cmd_reg->add_option("--seed", reg_seed, "sampling seed");
    cmd_reg->add_option("--config", reg_overlay.path, "JSON with registration settings");

    // ---- build-atlas ----
    auto* cmd_atlas = app.add_subcommand("build-atlas", "probabilistic atlas from a labeled directory");
    std::string atlas_train, atlas_out, atlas_mode = "affine";
    std::uint64_t atlas_seed = 0;
    ConfigOverlay atlas_overlay;
    cmd_atlas->add_option("--train-dir", atlas_train, "directory of <id>.nii.gz + <id>_seg.nii.gz")->required();
    cmd_atlas->add_option("--mode", atlas_mode, "rigid|affine|affine_bspline");
    cmd_atlas->add_option("--out", atlas_out, "output atlas directory")->required();
    cmd_atlas->add_option("--seed", atlas_seed, "sampling seed");
    cmd_atlas->add_option("--config", atlas_overlay.path, "JSON with registration settings");

    // ---- segment ----
    auto* cmd_seg = app.add_subcommand("segment", "label propagation from an atlas to a target");
    std::string seg_atlas, seg_target, seg_out, seg_mode = "affine", seg_fusion = "average";
    std::uint64_t seg_seed = 0;
    ConfigOverlay seg_overlay;
    cmd_seg->add_option("--atlas", seg_atlas, "atlas directory")->required();
    cmd_seg->add_option("--target", seg_target, "target volume")->required();
    cmd_seg->add_option("--out", seg_out, "output segmentation")->required();
    cmd_seg->add_option("--mode", seg_mode, "rigid|affine|affine_bspline");
    cmd_seg->add_option("--fusion", seg_fusion, "average|majority");
    cmd_seg->add_option("--seed", seg_seed, "sampling seed");
    cmd_seg->add_option("--config", seg_overlay.path, "JSON with registration settings");

    // ---- evaluate ----
    auto* cmd_eval = app.add_subcommand("evaluate", "DSC / Hausdorff / AVD against ground truth");
    std::string eval_pred, eval_gt, eval_csv, eval_pred_dir, eval_gt_dir;
    bool eval_surface = false;
    cmd_eval->add_option("--pred", eval_pred, "predicted labels");
    cmd_eval->add_option("--gt", eval_gt, "ground-truth labels");
    cmd_eval->add_option("--pred-dir", eval_pred_dir, "batch mode: directory of predictions");
    cmd_eval->add_option("--gt-dir", eval_gt_dir, "batch mode: directory of ground truths");
    cmd_eval->add_option("--csv", eval_csv, "write a CSV report here");
    cmd_eval->add_flag("--surface-hausdorff", eval_surface, "boundary-restricted Hausdorff variant");

    // ---- extract-patches ----
    auto* cmd_patch = app.add_subcommand("extract-patches", "tissue-masked 2D tiles with a stride");
    std::string patch_in, patch_labels, patch_out, patch_axis = "z";
    PatchExtractionSettings patch_settings;
    cmd_patch->add_option("--input", patch_in, "intensity volume")->required();
    cmd_patch->add_option("--labels", patch_labels, "label volume")->required();
    cmd_patch->add_option("--out", patch_out, "output directory")->required();
    cmd_patch->add_option("--size", patch_settings.size[0], "patch edge length");
    cmd_patch->add_option("--stride", patch_settings.stride[0], "tiling stride");
    cmd_patch->add_option("--axis", patch_axis, "slicing axis: x|y|z");
    cmd_patch->add_option("--min-tissue", patch_settings.min_tissue_voxels,
                          "minimum nonzero-label voxels to keep a tile");

    // ---- phantom ----
    auto* cmd_phantom = app.add_subcommand("phantom", "synthetic ellipsoid dataset with known labels");
    std::string phantom_out, phantom_prefix = "phantom";
    int phantom_count = 1;
    PhantomSpec phantom_spec;
    std::uint64_t phantom_seed = 0;
    cmd_phantom->add_option("--out", phantom_out, "output dataset directory")->required();
    cmd_phantom->add_option("--count", phantom_count, "number of cases");
    cmd_phantom->add_option("--prefix", phantom_prefix, "case id prefix");
    cmd_phantom->add_option("--seed", phantom_seed, "base seed; case i uses seed+i");
    cmd_phantom->add_option("--dim", phantom_spec.dims[0], "cubic volume edge (voxels)");
    cmd_phantom->add_option("--noise-sigma", phantom_spec.noise_sigma, "additive noise sigma");
    cmd_phantom->add_option("--bias-amplitude", phantom_spec.bias_amplitude, "multiplicative bias amplitude");
    cmd_phantom->add_option("--jitter-mm", phantom_spec.pose_jitter_mm, "pose translation jitter");
    cmd_phantom->add_option("--jitter-deg", phantom_spec.pose_jitter_deg, "pose rotation jitter");

    // ---- run ----
    auto* cmd_run = app.add_subcommand("run", "full pipeline from a JSON config");
    std::string run_config;
    std::int64_t run_seed = -1;
    cmd_run->add_option("--config", run_config, "pipeline config JSON")->required();
    cmd_run->add_option("--seed", run_seed, "override the config seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_pre) {
            pre_overlay.load();
            if (pre_overlay.loaded.contains("n4")) pre_cfg.n4 = n4_settings_from_json(pre_overlay.loaded["n4"]);
            if (pre_overlay.loaded.contains("diffusion"))
                pre_cfg.diffusion = diffusion_settings_from_json(pre_overlay.loaded["diffusion"]);
            if (pre_conduction == "rational") pre_cfg.diffusion.conduction = Conduction::rational;
            else if (pre_conduction != "exponential") fail(errc::config, "conduction must be exponential|rational");

            const Volume input = read_volume(pre_in);
            Volume field;
            const Volume out = preprocess_volume(input, pre_cfg, pre_field.empty() ? nullptr : &field);
            write_volume(out, pre_out);
            if (!pre_field.empty() && field.size() > 0) write_volume(field, pre_field);
            return 0;
        }

        if (*cmd_reg) {
            reg_overlay.load();
            const RegistrationSettings settings = registration_settings_from_json(reg_overlay.loaded);
            const Volume fixed = read_volume(reg_fixed);
            const Volume moving = read_volume(reg_moving);
            const Transform t =
                register_volumes(fixed, moving, parse_registration_mode(reg_mode), settings, reg_seed);
            save_transform(t, reg_out);
            return 0;
        }

        if (*cmd_atlas) {
            atlas_overlay.load();
            const RegistrationSettings settings = registration_settings_from_json(atlas_overlay.loaded);
            std::vector<TrainingCase> cases;
            for (const std::string& id : discover_cases(atlas_train, true)) {
                TrainingCase c;
                c.id = id;
                c.image = read_volume(find_case_image(atlas_train, id));
                c.labels = read_labels(find_case_labels(atlas_train, id));
                cases.push_back(std::move(c));
            }
            const ProbabilisticAtlas atlas =
                build_atlas(cases, parse_registration_mode(atlas_mode), settings, atlas_seed);
            save_atlas(atlas, atlas_out);
            std::printf("atlas built from %zu cases, reference %zu\n", cases.size(),
                        atlas.provenance.reference_index);
            return 0;
        }

        if (*cmd_seg) {
            seg_overlay.load();
            const RegistrationSettings settings = registration_settings_from_json(seg_overlay.loaded);
            const ProbabilisticAtlas atlas = load_atlas(seg_atlas);
            const Volume target = read_volume(seg_target);
            const SegmentationResult result =
                segment_both(atlas, target, parse_registration_mode(seg_mode), settings, seg_seed);
            if (seg_fusion == "average") write_labels(result.average_route, seg_out);
            else if (seg_fusion == "majority") write_labels(result.majority_route, seg_out);
            else fail(errc::config, "fusion must be average|majority");
            return 0;
        }

        if (*cmd_eval) {
            if (!eval_pred_dir.empty() || !eval_gt_dir.empty()) {
                if (eval_pred_dir.empty() || eval_gt_dir.empty())
                    fail(errc::config, "batch mode needs both --pred-dir and --gt-dir");
                return run_evaluate_batch(eval_pred_dir, eval_gt_dir, eval_csv, eval_surface);
            }
            if (eval_pred.empty() || eval_gt.empty())
                fail(errc::config, "evaluate needs --pred and --gt (or the -dir pair)");
            const LabelVolume pred = read_labels(eval_pred);
            const LabelVolume gt = read_labels(eval_gt);
            const MetricsReport r =
                evaluate(pred, gt, eval_surface ? HausdorffVariant::surface : HausdorffVariant::full_set);
            static const char* names[4] = {"csf", "gm", "wm", "mean"};
            for (int c = 0; c < 4; ++c) {
                const ClassRow& row = c < 3 ? r.tissue[c] : r.mean;
                std::printf("%-4s dsc=%s hd_mm=%s avd_pct=%s\n", names[c],
                            row.dsc ? format_metric(*row.dsc).c_str() : "-",
                            row.hd_mm ? format_metric(*row.hd_mm).c_str() : "-",
                            row.avd_pct ? format_metric(*row.avd_pct).c_str() : "-");
            }
            if (!eval_csv.empty()) {
                const std::vector<std::string> ids{fs::path(eval_pred).filename().string()};
                const std::vector<MetricsReport> reports{r};
                write_metrics_csv(eval_csv, ids, reports);
            }
            return 0;
        }

        if (*cmd_patch) {
            patch_settings.size[1] = patch_settings.size[0];
            patch_settings.stride[1] = patch_settings.stride[0];
            patch_settings.axis = axis_from_name(patch_axis);
            const Volume v = read_volume(patch_in);
            const LabelVolume l = read_labels(patch_labels);
            PatchSet set = extract_patches(v, l, patch_settings);
            set.source_case = fs::path(patch_in).filename().string();
            save_patches(set, patch_out);
            std::printf("%zu patches -> %s\n", set.patches.size(), patch_out.c_str());
            return 0;
        }

        if (*cmd_phantom) {
            fs::create_directories(phantom_out);
            phantom_spec.dims = {phantom_spec.dims[0], phantom_spec.dims[0], phantom_spec.dims[0]};
            const double scale = phantom_spec.dims[0] / 64.0;
            if (scale != 1.0) {
                for (auto* radii : {&phantom_spec.wm_radii, &phantom_spec.gm_radii, &phantom_spec.csf_radii})
                    for (double& r : *radii) r *= scale;
            }
            for (int i = 0; i < phantom_count; ++i) {
                PhantomSpec spec = phantom_spec;
                spec.seed = phantom_seed + static_cast<std::uint64_t>(i);
                auto [v, l] = generate_phantom(spec);
                char id[64];
                std::snprintf(id, sizeof(id), "%s_%02d", phantom_prefix.c_str(), i);
                write_volume(v, fs::path(phantom_out) / (std::string(id) + ".nii.gz"));
                write_labels(l, fs::path(phantom_out) / (std::string(id) + "_seg.nii.gz"));
            }
            std::printf("%d phantom case(s) -> %s\n", phantom_count, phantom_out.c_str());
            return 0;
        }

        if (*cmd_run) {
            PipelineConfig config = load_pipeline_config(run_config);
            if (run_seed >= 0) config.seed = static_cast<std::uint64_t>(run_seed);
            return run_pipeline(config);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
