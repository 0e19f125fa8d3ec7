#include "voxatlas/mutual_information.hpp"

#include <algorithm>
#include <cmath>

#include "voxatlas/error.hpp"

namespace voxatlas {

namespace {

struct BinWeights {
    int b0;
    double w0, w1;  // weight on b0 and b0+1 (w1 = 0 when pinned to one bin)
};

inline BinWeights bin_weights(double value, double lo, double scale, int bins) {
    if (scale <= 0.0) return {0, 1.0, 0.0};
    double c = (value - lo) * scale;
    if (c <= 0.0) return {0, 1.0, 0.0};
    if (c >= bins - 1) return {bins - 1, 1.0, 0.0};
    const int b0 = static_cast<int>(c);
    const double t = c - b0;
    return {b0, 1.0 - t, t};
}

struct RangeScale {
    double lo, scale;
};

RangeScale value_range(std::span<const float> values, int bins) {
    double lo = 1e300, hi = -1e300;
    for (float v : values) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    if (!(hi > lo)) return {lo, 0.0};
    return {lo, (bins - 1) / (hi - lo)};
}

double entropy_sum(const std::vector<double>& joint, int bins, double total) {
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
    for (int a = 0; a < bins; ++a)
        for (int b = 0; b < bins; ++b) {
            pa[a] += joint[static_cast<std::size_t>(a) * bins + b];
            pb[b] += joint[static_cast<std::size_t>(a) * bins + b];
        }
    double mi = 0.0;
    for (int a = 0; a < bins; ++a) {
        if (pa[a] <= 0.0) continue;
        for (int b = 0; b < bins; ++b) {
            const double pab = joint[static_cast<std::size_t>(a) * bins + b];
            if (pab <= 0.0 || pb[b] <= 0.0) continue;
            mi += pab / total * std::log(pab * total / (pa[a] * pb[b]));
        }
    }
    return mi;
}

}  // namespace

MiEstimator::MiEstimator(const Volume& fixed, const Volume& moving, int bins,
                         std::vector<std::size_t> sample_indices, bool out_of_field_as_background)
    : moving_(&moving), bins_(bins), background_mode_(out_of_field_as_background) {
    if (bins_ < 2) fail(errc::settings, "mutual information: bins must be >= 2");

    const Geometry& g = fixed.geometry();
    samples_.reserve(sample_indices.size());
    const std::size_t nx = g.dims[0];
    const std::size_t nxy = nx * g.dims[1];
    for (std::size_t idx : sample_indices) {
        const std::size_t k = idx / nxy;
        const std::size_t j = (idx - k * nxy) / nx;
        const std::size_t i = idx - k * nxy - j * nx;
        Sample s;
        s.world = continuous_index_to_world(g, {double(i), double(j), double(k)});
        s.fixed_value = fixed[idx];
        samples_.push_back(s);
    }

    double lo = 1e300, hi = -1e300;
    for (const Sample& s : samples_) {
        lo = std::min(lo, static_cast<double>(s.fixed_value));
        hi = std::max(hi, static_cast<double>(s.fixed_value));
    }
    fixed_lo_ = lo;
    fixed_scale_ = hi > lo ? (bins_ - 1) / (hi - lo) : 0.0;

    const RangeScale mr = value_range(moving.data(), bins_);
    moving_lo_ = mr.lo;
    moving_scale_ = mr.scale;
}

double MiEstimator::evaluate(const Transform& t) const { return evaluate_window(t, 0, samples_.size()); }

double MiEstimator::evaluate_window(const Transform& t, std::size_t first, std::size_t count) const {
    const std::size_t n = samples_.size();
    count = std::min(count, n);
    std::vector<double> joint(static_cast<std::size_t>(bins_) * bins_, 0.0);
    double total = 0.0;
    for (std::size_t w = 0; w < count; ++w) {
        const Sample& s = samples_[(first + w) % n];
        const Vec3 p = apply(t, s.world);
        SampleWithGradient mv = trilinear_sample_with_gradient(*moving_, p);
        if (!mv.in_field) {
            if (!background_mode_) continue;
            mv.value = 0.0f;  // skull-stripped background
        }
        const BinWeights fa = bin_weights(s.fixed_value, fixed_lo_, fixed_scale_, bins_);
        const BinWeights mb = bin_weights(mv.value, moving_lo_, moving_scale_, bins_);
        joint[static_cast<std::size_t>(fa.b0) * bins_ + mb.b0] += fa.w0 * mb.w0;
        if (mb.w1 > 0.0) joint[static_cast<std::size_t>(fa.b0) * bins_ + mb.b0 + 1] += fa.w0 * mb.w1;
        if (fa.w1 > 0.0) {
            joint[static_cast<std::size_t>(fa.b0 + 1) * bins_ + mb.b0] += fa.w1 * mb.w0;
            if (mb.w1 > 0.0)
                joint[static_cast<std::size_t>(fa.b0 + 1) * bins_ + mb.b0 + 1] += fa.w1 * mb.w1;
        }
        total += 1.0;
    }
    if (total < 2.0) fail(errc::no_overlap, "mutual information: fewer than two in-field samples");
    return entropy_sum(joint, bins_, total);
}

double MiEstimator::evaluate_with_bspline_gradient(const BSplineTransform& t, std::span<double> gradient) const {
    return evaluate_with_bspline_gradient_window(t, gradient, 0, samples_.size());
}

double MiEstimator::evaluate_with_bspline_gradient_window(const BSplineTransform& t, std::span<double> gradient,
                                                          std::size_t first, std::size_t count) const {
    if (gradient.size() != t.coefficients.size())
        fail(errc::settings, "mutual information: gradient size mismatch");

    const std::size_t n = samples_.size();
    count = std::min(count, n);

    struct PerSample {
        BinWeights fa, mb;
        Vec3 moving_gradient;
        Vec3 world;
        bool in_field;
        bool clamped;  // moving bin pinned at the range edge, zero slope
    };
    std::vector<PerSample> per(count);

    std::vector<double> joint(static_cast<std::size_t>(bins_) * bins_, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const Sample& s = samples_[(first + i) % n];
        const Vec3 p = t.apply(s.world);
        SampleWithGradient mv = trilinear_sample_with_gradient(*moving_, p);
        per[i].in_field = mv.in_field || background_mode_;
        if (!mv.in_field) {
            if (!background_mode_) continue;
            mv.value = 0.0f;
            mv.world_gradient = {0.0, 0.0, 0.0};  // flat background, no pull
        }
        per[i].fa = bin_weights(s.fixed_value, fixed_lo_, fixed_scale_, bins_);
        per[i].mb = bin_weights(mv.value, moving_lo_, moving_scale_, bins_);
        per[i].clamped = per[i].mb.w1 == 0.0;
        per[i].moving_gradient = mv.world_gradient;
        per[i].world = s.world;
        const BinWeights& fa = per[i].fa;
        const BinWeights& mb = per[i].mb;
        joint[static_cast<std::size_t>(fa.b0) * bins_ + mb.b0] += fa.w0 * mb.w0;
        if (mb.w1 > 0.0) joint[static_cast<std::size_t>(fa.b0) * bins_ + mb.b0 + 1] += fa.w0 * mb.w1;
        if (fa.w1 > 0.0) {
            joint[static_cast<std::size_t>(fa.b0 + 1) * bins_ + mb.b0] += fa.w1 * mb.w0;
            if (mb.w1 > 0.0)
                joint[static_cast<std::size_t>(fa.b0 + 1) * bins_ + mb.b0 + 1] += fa.w1 * mb.w1;
        }
        total += 1.0;
    }
    if (total < 2.0) fail(errc::no_overlap, "mutual information: fewer than two in-field samples");

    // log-ratio table L(a,b) = ln(p_ab / (p_a p_b)); cells with no mass are
    // skipped in the gradient
    std::vector<double> pa(bins_, 0.0), pb(bins_, 0.0);
    for (int a = 0; a < bins_; ++a)
        for (int b = 0; b < bins_; ++b) {
            pa[a] += joint[static_cast<std::size_t>(a) * bins_ + b];
            pb[b] += joint[static_cast<std::size_t>(a) * bins_ + b];
        }
    double mi = 0.0;
    std::vector<double> lratio(joint.size(), 0.0);
    for (int a = 0; a < bins_; ++a) {
        if (pa[a] <= 0.0) continue;
        for (int b = 0; b < bins_; ++b) {
            const double pab = joint[static_cast<std::size_t>(a) * bins_ + b];
            if (pab <= 0.0 || pb[b] <= 0.0) continue;
            const double l = std::log(pab * total / (pa[a] * pb[b]));
            lratio[static_cast<std::size_t>(a) * bins_ + b] = l;
            mi += pab / total * l;
        }
    }

    std::fill(gradient.begin(), gradient.end(), 0.0);
    const double bin_slope = moving_scale_;  // d(bin coord)/d(moving intensity)
    const int cells[3] = {t.grid_dims[0] - 3, t.grid_dims[1] - 3, t.grid_dims[2] - 3};

    for (const PerSample& ps : per) {
        if (!ps.in_field || ps.clamped) continue;
        // dMI/dm for this sample: moving weight shifts from b0 to b0+1
        double dmi_dm = 0.0;
        for (int side = 0; side < 2; ++side) {
            const int a = ps.fa.b0 + side;
            const double wa = side == 0 ? ps.fa.w0 : ps.fa.w1;
            if (wa <= 0.0) continue;
            const double l0 = lratio[static_cast<std::size_t>(a) * bins_ + ps.mb.b0];
            const double l1 = lratio[static_cast<std::size_t>(a) * bins_ + ps.mb.b0 + 1];
            dmi_dm += wa * bin_slope * (l1 - l0);
        }
        dmi_dm /= total;
        if (dmi_dm == 0.0) continue;

        // chain through displacement: dm/dc = grad(moving) . basis weight
        double u[3] = {(ps.world.x - t.grid_origin.x) / t.grid_spacing[0],
                       (ps.world.y - t.grid_origin.y) / t.grid_spacing[1],
                       (ps.world.z - t.grid_origin.z) / t.grid_spacing[2]};
        int cell[3];
        double frac[3];
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            if (u[a] < 0.0 || u[a] > cells[a]) {
                inside = false;
                break;
            }
            cell[a] = std::min(static_cast<int>(u[a]), cells[a] - 1);
            frac[a] = u[a] - cell[a];
        }
        if (!inside) continue;
        const auto wx = cubic_bspline_weights(frac[0]);
        const auto wy = cubic_bspline_weights(frac[1]);
        const auto wz = cubic_bspline_weights(frac[2]);
        for (int kz = 0; kz < 4; ++kz) {
            const std::size_t zo = static_cast<std::size_t>(cell[2] + kz) * t.grid_dims[1];
            for (int ky = 0; ky < 4; ++ky) {
                const double wyz = wy[ky] * wz[kz];
                const std::size_t yo = (zo + static_cast<std::size_t>(cell[1] + ky)) * t.grid_dims[0];
                for (int kx = 0; kx < 4; ++kx) {
                    const double w = wx[kx] * wyz * dmi_dm;
                    const std::size_t c = (yo + static_cast<std::size_t>(cell[0] + kx)) * 3;
                    gradient[c] += w * ps.moving_gradient.x;
                    gradient[c + 1] += w * ps.moving_gradient.y;
                    gradient[c + 2] += w * ps.moving_gradient.z;
                }
            }
        }
    }
    return mi;
}

double mutual_information(const Volume& fixed, const Volume& moving, const Transform& transform, int bins,
                          const LabelVolume* mask) {
    if (mask && !mask->geometry().same_grid(fixed.geometry()))
        fail(errc::pairing, "mutual information: mask geometry does not match fixed image");
    std::vector<std::size_t> indices;
    indices.reserve(fixed.size());
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        if (mask && (*mask)[i] == 0) continue;
        indices.push_back(i);
    }
    const MiEstimator estimator(fixed, moving, bins, std::move(indices));
    return estimator.evaluate(transform);
}

std::size_t select_reference(std::span<const Volume> volumes, int bins) {
    if (volumes.size() < 2) fail(errc::settings, "select_reference: need at least two volumes");
    std::size_t best = 0;
    double best_score = -1e300;
    // ties (up to estimator rounding: the swapped-argument histograms are
    // exact transposes) keep the lowest index
    constexpr double tie_tol = 1e-12;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        double score = 0.0;
        for (std::size_t j = 0; j < volumes.size(); ++j) {
            if (j == i) continue;
            score += mutual_information(volumes[i], volumes[j], identity_transform(), bins);
        }
        if (score > best_score + tie_tol) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

}  // namespace voxatlas
