#include "voxatlas/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "voxatlas/error.hpp"
#include "voxatlas/metrics.hpp"
#include "voxatlas/nifti.hpp"
#include "voxatlas/rng.hpp"
#include "voxatlas/settings_json.hpp"

namespace voxatlas {

using nlohmann::json;

Volume preprocess_volume(const Volume& input, const PreprocessConfig& config, Volume* bias_field_out) {
    Volume current = input;
    if (!config.skip_n4) {
        N4Result n4 = n4_correct(current, threshold_mask(current), config.n4);
        if (bias_field_out) *bias_field_out = n4.field;
        current = std::move(n4.corrected);
    }
    if (!config.skip_diffusion) current = anisotropic_diffusion(current, config.diffusion);
    return current;
}

namespace {

std::filesystem::path find_case_file(const std::filesystem::path& root, const std::string& stem) {
    for (const char* ext : {".nii.gz", ".nii"}) {
        const auto candidate = root / (stem + ext);
        if (std::filesystem::exists(candidate)) return candidate;
    }
    fail(errc::config, "dataset: no " + stem + ".nii[.gz] under " + root.string());
}

}  // namespace

void PipelineConfig::validate() const {
    if (train_ids.size() < 2) fail(errc::config, "config: atlas builds need at least two training cases");
    if (fusion != "average" && fusion != "majority")
        fail(errc::config, "config: fusion must be \"average\" or \"majority\"");

    std::set<std::string> seen;
    auto check_disjoint = [&](const std::vector<std::string>& ids, const char* split) {
        for (const std::string& id : ids) {
            if (!seen.insert(id).second)
                fail(errc::config, std::string("config: case \"") + id + "\" appears in more than one split (" +
                                       split + ")");
        }
    };
    check_disjoint(train_ids, "train");
    check_disjoint(validation_ids, "validation");
    check_disjoint(test_ids, "test");

    for (const std::string& id : train_ids) {
        find_case_image(dataset_root, id);
        find_case_labels(dataset_root, id);
    }
    for (const std::string& id : validation_ids) find_case_image(dataset_root, id);
    for (const std::string& id : test_ids) {
        find_case_image(dataset_root, id);
        find_case_labels(dataset_root, id);
    }
    registration.validate();
    preprocess.n4.validate();
    preprocess.diffusion.validate();
}

std::filesystem::path find_case_image(const std::filesystem::path& root, const std::string& id) {
    return find_case_file(root, id);
}

std::filesystem::path find_case_labels(const std::filesystem::path& root, const std::string& id) {
    return find_case_file(root, id + "_seg");
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(errc::config, "config " + path.string() + ": " + e.what());
    }

    PipelineConfig c;
    if (!j.contains("dataset_root")) fail(errc::config, "config: dataset_root is required");
    if (!j.contains("output_dir")) fail(errc::config, "config: output_dir is required");
    c.dataset_root = j.at("dataset_root").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    const json splits = j.value("splits", json::object());
    c.train_ids = splits.value("train", std::vector<std::string>{});
    c.validation_ids = splits.value("validation", std::vector<std::string>{});
    c.test_ids = splits.value("test", std::vector<std::string>{});
    c.seed = j.value("seed", std::uint64_t{0});
    c.fusion = j.value("fusion", std::string("average"));

    const json pp = j.value("preprocess", json::object());
    c.preprocess.skip_n4 = pp.value("skip_n4", false);
    c.preprocess.skip_diffusion = pp.value("skip_diffusion", false);
    c.preprocess.n4 = n4_settings_from_json(pp.value("n4", json::object()));
    c.preprocess.diffusion = diffusion_settings_from_json(pp.value("diffusion", json::object()));

    const json reg = j.value("registration", json::object());
    c.mode = parse_registration_mode(reg.value("mode", std::string("affine")));
    c.registration = registration_settings_from_json(reg);
    return c;
}

void save_pipeline_config(const PipelineConfig& c, const std::filesystem::path& path) {
    json reg = to_json(c.registration);
    reg["mode"] = to_string(c.mode);
    const json j{{"dataset_root", c.dataset_root.string()},
                 {"output_dir", c.output_dir.string()},
                 {"splits",
                  json{{"train", c.train_ids}, {"validation", c.validation_ids}, {"test", c.test_ids}}},
                 {"seed", c.seed},
                 {"fusion", c.fusion},
                 {"preprocess",
                  json{{"skip_n4", c.preprocess.skip_n4},
                       {"skip_diffusion", c.preprocess.skip_diffusion},
                       {"n4", to_json(c.preprocess.n4)},
                       {"diffusion", to_json(c.preprocess.diffusion)}}},
                 {"registration", reg}};
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot write config copy " + path.string());
    out << j.dump(2) << "\n";
}

int run_pipeline(const PipelineConfig& config) {
    config.validate();

    const auto& out_dir = config.output_dir;
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "preprocessed");
    std::filesystem::create_directories(out_dir / "transforms");
    std::filesystem::create_directories(out_dir / "segmentations");
    save_pipeline_config(config, out_dir / "config.json");

    json errors = json::array();
    auto record_error = [&](const std::string& id, const std::string& stage, const std::string& what) {
        errors.push_back({{"case", id}, {"stage", stage}, {"error", what}});
    };

    // preprocess train and test cases; validation ids are recorded in the
    // config copy but take no part in the atlas path
    std::vector<std::string> all_ids = config.train_ids;
    all_ids.insert(all_ids.end(), config.test_ids.begin(), config.test_ids.end());
    std::vector<std::optional<Volume>> preprocessed(all_ids.size());
    for (std::size_t i = 0; i < all_ids.size(); ++i) {
        const std::string& id = all_ids[i];
        try {
            const Volume raw = read_volume(find_case_image(config.dataset_root, id));
            Volume clean = preprocess_volume(raw, config.preprocess);
            write_volume(clean, out_dir / "preprocessed" / (id + ".nii.gz"));
            preprocessed[i] = std::move(clean);
        } catch (const std::exception& e) {
            record_error(id, "preprocess", e.what());
        }
    }

    int exit_code = 0;

    // atlas build from the train split
    std::optional<ProbabilisticAtlas> atlas;
    try {
        std::vector<TrainingCase> training;
        for (std::size_t i = 0; i < config.train_ids.size(); ++i) {
            if (!preprocessed[i]) continue;  // failed cases were already recorded
            TrainingCase c;
            c.id = config.train_ids[i];
            c.image = *preprocessed[i];
            c.labels = read_labels(find_case_labels(config.dataset_root, c.id));
            training.push_back(std::move(c));
        }
        atlas = build_atlas(training, config.mode, config.registration, derive_seed(config.seed, 1));
        save_atlas(*atlas, out_dir / "atlas");
    } catch (const std::exception& e) {
        record_error("", "build-atlas", e.what());
    }

    // segment and evaluate the test split
    std::vector<std::string> scored_ids;
    std::vector<MetricsReport> reports_average;
    std::vector<MetricsReport> reports_majority;
    if (atlas) {
        for (std::size_t t = 0; t < config.test_ids.size(); ++t) {
            const std::string& id = config.test_ids[t];
            const std::size_t pre_index = config.train_ids.size() + t;
            if (!preprocessed[pre_index]) continue;
            try {
                const Volume& target = *preprocessed[pre_index];
                const SegmentationResult seg = segment_both(*atlas, target, config.mode, config.registration,
                                                            derive_seed(config.seed, 1000 + t));
                save_transform(seg.transform, out_dir / "transforms" / (id + ".json"));
                write_labels(seg.average_route, out_dir / "segmentations" / (id + "_average.nii.gz"));
                write_labels(seg.majority_route, out_dir / "segmentations" / (id + "_majority.nii.gz"));

                const LabelVolume gt = read_labels(find_case_labels(config.dataset_root, id));
                reports_average.push_back(evaluate(seg.average_route, gt));
                reports_majority.push_back(evaluate(seg.majority_route, gt));
                scored_ids.push_back(id);
            } catch (const std::exception& e) {
                record_error(id, "segment", e.what());
            }
        }
        write_metrics_csv(out_dir / "metrics_average.csv", scored_ids, reports_average);
        write_metrics_csv(out_dir / "metrics_majority.csv", scored_ids, reports_majority);
        const auto& primary = config.fusion == "majority" ? reports_majority : reports_average;
        write_metrics_csv(out_dir / "metrics.csv", scored_ids, primary);
    } else {
        exit_code = 1;
    }

    if (!errors.empty()) {
        std::ofstream ef(out_dir / "errors.json");
        ef << errors.dump(2) << "\n";
        exit_code = 1;
    }
    return exit_code;
}

}  // namespace voxatlas
