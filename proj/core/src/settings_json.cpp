#include "voxatlas/settings_json.hpp"

#include "voxatlas/error.hpp"

namespace voxatlas {

using nlohmann::json;

json to_json(const N4Settings& s) {
    return json{{"fitting_levels", s.fitting_levels},
                {"max_iterations_per_level", s.max_iterations_per_level},
                {"convergence_threshold", s.convergence_threshold},
                {"histogram_bins", s.histogram_bins},
                {"bspline_grid", s.bspline_grid},
                {"wiener_noise", s.wiener_noise},
                {"fwhm", s.fwhm}};
}

N4Settings n4_settings_from_json(const json& j) {
    N4Settings s;
    s.fitting_levels = j.value("fitting_levels", s.fitting_levels);
    s.max_iterations_per_level = j.value("max_iterations_per_level", s.max_iterations_per_level);
    s.convergence_threshold = j.value("convergence_threshold", s.convergence_threshold);
    s.histogram_bins = j.value("histogram_bins", s.histogram_bins);
    s.bspline_grid = j.value("bspline_grid", s.bspline_grid);
    s.wiener_noise = j.value("wiener_noise", s.wiener_noise);
    s.fwhm = j.value("fwhm", s.fwhm);
    return s;
}

json to_json(const DiffusionSettings& s) {
    return json{{"iterations", s.iterations},
                {"kappa", s.kappa},
                {"dt", s.dt},
                {"conduction", s.conduction == Conduction::exponential ? "exponential" : "rational"}};
}

DiffusionSettings diffusion_settings_from_json(const json& j) {
    DiffusionSettings s;
    s.iterations = j.value("iterations", s.iterations);
    s.kappa = j.value("kappa", s.kappa);
    s.dt = j.value("dt", s.dt);
    const std::string c = j.value("conduction", "exponential");
    if (c == "exponential") s.conduction = Conduction::exponential;
    else if (c == "rational") s.conduction = Conduction::rational;
    else fail(errc::config, "config: conduction must be exponential or rational");
    return s;
}

json to_json(const RegistrationSettings& s) {
    return json{{"pyramid_levels", s.pyramid_levels},
                {"smoothing_sigmas_mm", s.smoothing_sigmas_mm},
                {"downsample_factors", s.downsample_factors},
                {"iterations", s.iterations},
                {"sample_fractions", s.sample_fractions},
                {"mi_bins", s.mi_bins},
                {"initial_step_mm", s.initial_step_mm},
                {"max_step_mm", s.max_step_mm},
                {"min_step_mm", s.min_step_mm},
                {"gradient_probe_mm", s.gradient_probe_mm},
                {"bspline_cell_mm", s.bspline_cell_mm},
                {"bspline_iterations", s.bspline_iterations}};
}

RegistrationSettings registration_settings_from_json(const json& j) {
    RegistrationSettings s;
    s.pyramid_levels = j.value("pyramid_levels", s.pyramid_levels);
    s.smoothing_sigmas_mm = j.value("smoothing_sigmas_mm", s.smoothing_sigmas_mm);
    s.downsample_factors = j.value("downsample_factors", s.downsample_factors);
    s.iterations = j.value("iterations", s.iterations);
    s.sample_fractions = j.value("sample_fractions", s.sample_fractions);
    s.mi_bins = j.value("mi_bins", s.mi_bins);
    s.initial_step_mm = j.value("initial_step_mm", s.initial_step_mm);
    s.max_step_mm = j.value("max_step_mm", s.max_step_mm);
    s.min_step_mm = j.value("min_step_mm", s.min_step_mm);
    s.gradient_probe_mm = j.value("gradient_probe_mm", s.gradient_probe_mm);
    s.bspline_cell_mm = j.value("bspline_cell_mm", s.bspline_cell_mm);
    s.bspline_iterations = j.value("bspline_iterations", s.bspline_iterations);
    return s;
}

}  // namespace voxatlas
