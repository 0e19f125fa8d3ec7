#include "voxatlas/registration.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "voxatlas/distance_transform.hpp"
#include "voxatlas/error.hpp"
#include "voxatlas/mutual_information.hpp"
#include "voxatlas/rng.hpp"
#include "voxatlas/sampling.hpp"

namespace voxatlas {

namespace {

Volume pyramid_level(const Volume& v, double sigma_mm, int factor) {
    const Volume smoothed = sigma_mm > 0.0 ? gaussian_smooth(v, {sigma_mm, sigma_mm, sigma_mm}) : v;
    if (factor <= 1) return smoothed;
    Geometry g = v.geometry();
    for (int a = 0; a < 3; ++a) {
        g.dims[a] = std::max(1, (v.geometry().dims[a] + factor - 1) / factor);
        g.spacing[a] = v.geometry().spacing[a] * factor;
    }
    return resample(smoothed, identity_transform(), g, Interp::trilinear);
}

// Samples come from the dilated fixed-image foreground: {intensity > 0} (the
// brain mask in skull-stripped data) plus a shell of nearby background. The
// shell keeps the strong tissue/background boundary signal while far-field
// background stays excluded, so the estimator cannot reward shrinking the
// in-field overlap. The candidate list is kept in one seeded shuffle: the
// optimizer evaluates rotating windows of it, one fresh subset per iteration.
std::vector<std::size_t> shuffled_foreground(const Volume& fixed, std::uint64_t seed) {
    const Geometry& g = fixed.geometry();
    std::vector<std::uint8_t> fg(fixed.size());
    bool any = false;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        fg[i] = fixed[i] > 0.0f ? 1 : 0;
        any = any || fg[i];
    }

    std::vector<std::size_t> candidates;
    candidates.reserve(fixed.size());
    if (!any) {
        candidates.resize(fixed.size());
        for (std::size_t i = 0; i < fixed.size(); ++i) candidates[i] = i;
    } else {
        const double max_spacing = std::max({g.spacing[0], g.spacing[1], g.spacing[2]});
        const double radius = std::max(3.0, 2.0 * max_spacing);
        const double r2 = radius * radius;
        const std::vector<double> dist2 = squared_distance_transform(g, fg);
        for (std::size_t i = 0; i < fixed.size(); ++i)
            if (dist2[i] <= r2) candidates.push_back(i);
    }

    Rng rng(seed);
    for (std::size_t i = candidates.size() - 1; i > 0; --i)
        std::swap(candidates[i], candidates[rng.below(i + 1)]);
    return candidates;
}

double half_diagonal_mm(const Geometry& g) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double e = (g.dims[a] - 1) * g.spacing[a];
        d2 += e * e;
    }
    return std::max(1.0, 0.5 * std::sqrt(d2));
}

// Scaled parameter vectors: every entry is in mm-equivalent units so one
// optimizer step moves peripheral image points by roughly the step length.
struct RigidSpace {
    Vec3 center;
    double rot_scale;  // mm of peripheral motion per radian

    static constexpr std::size_t size = 6;

    RigidTransform make(std::span<const double> u) const {
        RigidTransform t;
        t.center = center;
        t.rotation = {u[0] / rot_scale, u[1] / rot_scale, u[2] / rot_scale};
        t.translation = {u[3], u[4], u[5]};
        return t;
    }
    std::vector<double> extract(const RigidTransform& t) const {
        return {t.rotation.x * rot_scale, t.rotation.y * rot_scale, t.rotation.z * rot_scale,
                t.translation.x, t.translation.y, t.translation.z};
    }
};

struct AffineSpace {
    Vec3 center;
    double mat_scale;  // mm of peripheral motion per unit matrix deviation

    static constexpr std::size_t size = 12;

    AffineTransform make(std::span<const double> u) const {
        AffineTransform t;
        t.center = center;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                t.matrix(r, c) = (r == c ? 1.0 : 0.0) + u[static_cast<std::size_t>(r) * 3 + c] / mat_scale;
        t.translation = {u[9], u[10], u[11]};
        return t;
    }
    std::vector<double> extract(const AffineTransform& t) const {
        std::vector<double> u(size);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                u[static_cast<std::size_t>(r) * 3 + c] = (t.matrix(r, c) - (r == c ? 1.0 : 0.0)) * mat_scale;
        u[9] = t.translation.x;
        u[10] = t.translation.y;
        u[11] = t.translation.z;
        return u;
    }
};

[[noreturn]] void diverged(const char* stage, int level, int iteration) {
    fail(errc::divergence, std::string("registration: non-finite objective in ") + stage + " stage, level " +
                               std::to_string(level) + ", iteration " + std::to_string(iteration));
}

// Adaptive-step stochastic gradient ascent. Every iteration estimates the MI
// gradient on a fresh sample window (decorrelating the interpolation-cell
// micro-texture that a frozen sample set would bake into the objective) and
// steps along the normalized direction under a deterministic decaying gain.
// `grad` returns false when the window has no usable overlap; `admissible`
// rejects candidates outside the parameter guards.
template <typename Grad, typename Admissible>
void stochastic_ascent(std::vector<double>& u, Grad&& grad, Admissible&& admissible, int iterations,
                       std::size_t window, std::size_t sample_count, const RegistrationSettings& s,
                       const char* stage, int level) {
    // harmonic gain decay: early iterations explore at the full step, late
    // ones settle without ever freezing (sustained travel matters more than
    // microscopic terminal steps; the per-level guard handles endpoint noise)
    const double gain_window = std::max(4.0, iterations / 8.0);
    std::vector<double> g(u.size()), cand(u.size());
    for (int k = 0; k < iterations; ++k) {
        const double step = std::max(s.min_step_mm, s.initial_step_mm / (1.0 + k / gain_window));
        const std::size_t first = (static_cast<std::size_t>(k) * window) % std::max<std::size_t>(sample_count, 1);
        if (!grad(u, first, window, g)) continue;
        double gn = 0.0;
        for (double v : g) gn += v * v;
        gn = std::sqrt(gn);
        if (!std::isfinite(gn)) diverged(stage, level, k);
        if (gn == 0.0) continue;

        for (std::size_t i = 0; i < u.size(); ++i) cand[i] = u[i] + step * g[i] / gn;
        if (!admissible(cand)) continue;
        u = cand;
    }
}

std::size_t window_size(double fraction, std::size_t n) {
    std::size_t count = static_cast<std::size_t>(fraction * static_cast<double>(n));
    count = std::max<std::size_t>(count, 1024);  // keep the gradient usable on small levels
    return std::clamp<std::size_t>(count, std::min<std::size_t>(n, 16), n);
}

struct LevelData {
    Volume fixed;
    Volume moving;
    std::optional<MiEstimator> estimator;  // references this->moving, built in place
};

std::vector<LevelData> build_pyramid(const Volume& fixed, const Volume& moving,
                                     const RegistrationSettings& s, std::uint64_t seed,
                                     std::uint64_t stage_tag) {
    // the estimator keeps a pointer to its moving volume, so the volumes must
    // reach their final addresses before the estimator is constructed
    std::vector<LevelData> levels(static_cast<std::size_t>(s.pyramid_levels));
    for (int l = 0; l < s.pyramid_levels; ++l) {
        LevelData& level = levels[l];
        level.fixed = pyramid_level(fixed, s.smoothing_sigmas_mm[l], s.downsample_factors[l]);
        level.moving = pyramid_level(moving, s.smoothing_sigmas_mm[l], s.downsample_factors[l]);
        auto samples = shuffled_foreground(level.fixed, derive_seed(seed, stage_tag * 97 + l));
        level.estimator.emplace(level.fixed, level.moving, s.mi_bins, std::move(samples),
                                /*out_of_field_as_background=*/true);
    }
    return levels;
}

}  // namespace

void RegistrationSettings::validate() const {
    if (pyramid_levels < 1) fail(errc::settings, "registration: pyramid_levels must be >= 1");
    if (mi_bins < 8) fail(errc::settings, "registration: mi_bins must be >= 8");
    const std::size_t n = static_cast<std::size_t>(pyramid_levels);
    if (smoothing_sigmas_mm.size() != n || downsample_factors.size() != n || iterations.size() != n ||
        sample_fractions.size() != n)
        fail(errc::settings, "registration: per-level vectors must match pyramid_levels");
    for (double fr : sample_fractions)
        if (!(fr > 0.0) || fr > 1.0) fail(errc::settings, "registration: sample_fraction must be in (0, 1]");
    for (int f : downsample_factors)
        if (f < 1) fail(errc::settings, "registration: downsample factor must be >= 1");
    for (int i : iterations)
        if (i < 1) fail(errc::settings, "registration: iterations must be >= 1");
    if (!(initial_step_mm > 0.0) || !(min_step_mm > 0.0) || max_step_mm < initial_step_mm)
        fail(errc::settings, "registration: invalid step sizes");
    if (!(bspline_cell_mm > 0.0)) fail(errc::settings, "registration: bspline_cell_mm must be positive");
    if (bspline_iterations < 1) fail(errc::settings, "registration: bspline_iterations must be >= 1");
}

Transform register_volumes(const Volume& fixed, const Volume& moving, RegistrationMode mode,
                           const RegistrationSettings& settings, std::uint64_t seed) {
    settings.validate();
    if (fixed.size() == 0 || moving.size() == 0) fail(errc::settings, "registration: empty volume");

    const Vec3 com_fixed = center_of_mass(fixed);
    const Vec3 com_moving = center_of_mass(moving);

    RigidTransform init;
    init.center = com_fixed;
    init.translation = com_moving - com_fixed;
    const Transform initial_transform = init;

    const double scale_mm = half_diagonal_mm(fixed.geometry());

    // Numeric central differences of the window estimate; returns false when
    // a probe loses the overlap entirely.
    auto numeric_gradient = [&](const MiEstimator& est, auto&& make_transform, const std::vector<double>& u,
                                std::size_t first, std::size_t window, std::vector<double>& g) -> bool {
        std::vector<double> probe = u;
        const double h = settings.gradient_probe_mm;
        try {
            for (std::size_t i = 0; i < u.size(); ++i) {
                probe[i] = u[i] + h;
                const double fp = est.evaluate_window(make_transform(probe), first, window);
                probe[i] = u[i] - h;
                const double fm = est.evaluate_window(make_transform(probe), first, window);
                probe[i] = u[i];
                g[i] = (fp - fm) / (2.0 * h);
            }
        } catch (const Error& e) {
            if (e.code() == errc::no_overlap) return false;
            throw;
        }
        return true;
    };

    // Level loop shared by the stages: optimize, then keep the update only if
    // the level's full-foreground estimate did not get worse (per-level
    // monotonicity; also pins self-registration exactly at its optimum).
    auto run_stage = [&](auto levels, auto&& make_transform, auto&& admissible, auto&& gradient,
                         std::vector<double>& u, int iterations_override, const char* stage) {
        for (int l = 0; l < settings.pyramid_levels; ++l) {
            const MiEstimator& est = *levels[l].estimator;
            const std::size_t window = window_size(settings.sample_fractions[l], est.sample_count());
            const int iterations = iterations_override > 0 ? iterations_override : settings.iterations[l];
            const std::vector<double> u_start = u;
            const double f_start = est.evaluate(make_transform(u_start));
            auto grad = [&](const std::vector<double>& uu, std::size_t first, std::size_t count,
                            std::vector<double>& g) { return gradient(est, uu, first, count, g); };
            stochastic_ascent(u, grad, admissible, iterations, window, est.sample_count(), settings, stage, l);
            const double f_end = est.evaluate(make_transform(u));
            if (!(f_end >= f_start)) u = u_start;
        }
    };

    // rigid stage
    RigidTransform rigid = init;
    {
        const RigidSpace space{init.center, scale_mm};
        auto levels = build_pyramid(fixed, moving, settings, seed, 1);
        std::vector<double> u = space.extract(rigid);
        auto make = [&](const std::vector<double>& uu) { return Transform{space.make(uu)}; };
        auto gradient = [&](const MiEstimator& est, const std::vector<double>& uu, std::size_t first,
                            std::size_t count, std::vector<double>& g) {
            return numeric_gradient(est, make, uu, first, count, g);
        };
        run_stage(std::move(levels), make, [](const std::vector<double>&) { return true; }, gradient, u, 0,
                  "rigid");
        rigid = space.make(u);
    }
    Transform result = rigid;

    // affine stage, seeded from the rigid result
    if (mode == RegistrationMode::affine || mode == RegistrationMode::affine_bspline) {
        AffineTransform affine = AffineTransform::from_rigid(rigid);
        const AffineSpace space{init.center, scale_mm};
        auto levels = build_pyramid(fixed, moving, settings, seed, 2);
        std::vector<double> u = space.extract(affine);
        auto make = [&](const std::vector<double>& uu) { return Transform{space.make(uu)}; };
        auto admissible = [&](const std::vector<double>& uu) {
            const double d = space.make(uu).matrix.det();
            return d > 0.2 && d < 5.0;  // collapse guard
        };
        auto gradient = [&](const MiEstimator& est, const std::vector<double>& uu, std::size_t first,
                            std::size_t count, std::vector<double>& g) {
            return numeric_gradient(est, make, uu, first, count, g);
        };
        run_stage(std::move(levels), make, admissible, gradient, u, 0, "affine");
        affine = space.make(u);
        result = affine;
    }

    // B-spline stage on top of the affine result; the same world-space grid
    // is refined through every pyramid level with analytic MI gradients
    if (mode == RegistrationMode::affine_bspline) {
        BSplineTransform bspline = BSplineTransform::for_domain(
            fixed.geometry(), std::get<AffineTransform>(result), settings.bspline_cell_mm);
        auto levels = build_pyramid(fixed, moving, settings, seed, 3);
        std::vector<double> u = bspline.coefficients;
        auto make = [&](const std::vector<double>& uu) {
            BSplineTransform t = bspline;
            t.coefficients = uu;
            return Transform{t};
        };
        auto gradient = [&](const MiEstimator& est, const std::vector<double>& uu, std::size_t first,
                            std::size_t count, std::vector<double>& g) {
            BSplineTransform t = bspline;
            t.coefficients = uu;
            try {
                est.evaluate_with_bspline_gradient_window(t, g, first, count);
            } catch (const Error& e) {
                if (e.code() != errc::no_overlap) throw;
                return false;
            }
            return true;
        };
        run_stage(std::move(levels), make, [](const std::vector<double>&) { return true; }, gradient, u,
                  settings.bspline_iterations, "bspline");
        bspline.coefficients = u;
        result = bspline;
    }

    // Never return a transform that scores below the initialization on the
    // full-volume estimate.
    const double mi_init = mutual_information(fixed, moving, initial_transform, settings.mi_bins);
    const double mi_result = mutual_information(fixed, moving, result, settings.mi_bins);
    if (!(mi_result >= mi_init - 1e-9)) return initial_transform;
    return result;
}

RegistrationMode parse_registration_mode(const std::string& name) {
    if (name == "rigid") return RegistrationMode::rigid;
    if (name == "affine") return RegistrationMode::affine;
    if (name == "affine_bspline") return RegistrationMode::affine_bspline;
    fail(errc::config, "unknown registration mode \"" + name + "\" (rigid|affine|affine_bspline)");
}

std::string to_string(RegistrationMode mode) {
    switch (mode) {
        case RegistrationMode::rigid: return "rigid";
        case RegistrationMode::affine: return "affine";
        case RegistrationMode::affine_bspline: return "affine_bspline";
    }
    return "unknown";
}

}  // namespace voxatlas
