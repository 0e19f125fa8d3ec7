#include "voxatlas/bias_field.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "voxatlas/error.hpp"

namespace voxatlas {

namespace {

using cplx = std::complex<double>;

// Iterative radix-2 FFT; size must be a power of two. Inverse is normalized.
void fft_radix2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

struct Sharpener {
    int bins;
    double fwhm;
    double wiener_noise;

    // Histogram-sharpens `values` over the mask in place of a copy:
    // deconvolves the Gaussian bias model from the log-intensity histogram
    // and maps each voxel through the resulting E(u|v) lookup.
    std::vector<double> apply(const std::vector<double>& values, const std::vector<std::uint8_t>& mask) const {
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!mask[i]) continue;
            lo = std::min(lo, values[i]);
            hi = std::max(hi, values[i]);
        }
        if (!(hi > lo)) {
            // perfectly flat histogram: nothing to sharpen
            return values;
        }
        const double slope = (hi - lo) / (bins - 1);

        // triangular parzen binning
        std::vector<double> hist(bins, 0.0);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!mask[i]) continue;
            const double c = (values[i] - lo) / slope;
            const int b = static_cast<int>(c);
            const double off = c - b;
            if (off == 0.0) {
                hist[b] += 1.0;
            } else if (b < bins - 1) {
                hist[b] += 1.0 - off;
                hist[b + 1] += off;
            }
        }

        std::size_t padded = 1;
        while (padded < static_cast<std::size_t>(bins)) padded <<= 1;
        padded <<= 1;
        const std::size_t offset = (padded - bins) / 2;

        std::vector<cplx> vf(padded, cplx(0, 0));
        for (int b = 0; b < bins; ++b) vf[offset + b] = hist[b];
        fft_radix2(vf, false);

        // Gaussian blur kernel of the bias model, in histogram units
        const double scaled_fwhm = fwhm / slope;
        const double exp_factor = 4.0 * std::numbers::ln2 / (scaled_fwhm * scaled_fwhm);
        const double scale = 2.0 * std::sqrt(std::numbers::ln2 / std::numbers::pi) / scaled_fwhm;
        std::vector<cplx> f(padded, cplx(0, 0));
        f[0] = scale;
        const std::size_t half = padded / 2;
        for (std::size_t n = 1; n <= half; ++n) {
            const double v = scale * std::exp(-exp_factor * static_cast<double>(n) * static_cast<double>(n));
            f[n] = v;
            f[padded - n] = v;
        }
        std::vector<cplx> ff = f;
        fft_radix2(ff, false);

        // Wiener deconvolution, then clamp the sharpened histogram at zero
        std::vector<cplx> uf(padded);
        for (std::size_t n = 0; n < padded; ++n) {
            const cplx c = std::conj(ff[n]);
            const cplx g = c / (c * ff[n] + wiener_noise);
            uf[n] = vf[n] * g.real();
        }
        std::vector<cplx> u = uf;
        fft_radix2(u, true);
        for (auto& x : u) x = cplx(std::max(x.real(), 0.0), 0.0);

        // E(u|v) = (smoothed value-weighted histogram) / (smoothed histogram)
        std::vector<cplx> numer(padded);
        for (std::size_t n = 0; n < padded; ++n) {
            const double bin_value = lo + (static_cast<double>(n) - static_cast<double>(offset)) * slope;
            numer[n] = bin_value * u[n].real();
        }
        fft_radix2(numer, false);
        for (std::size_t n = 0; n < padded; ++n) numer[n] *= ff[n];
        fft_radix2(numer, true);

        std::vector<cplx> denom = u;
        fft_radix2(denom, false);
        for (std::size_t n = 0; n < padded; ++n) denom[n] *= ff[n];
        fft_radix2(denom, true);

        std::vector<double> expectation(bins);
        for (int b = 0; b < bins; ++b) {
            const double e = numer[offset + b].real() / denom[offset + b].real();
            expectation[b] = std::isfinite(e) ? e : 0.0;
        }

        std::vector<double> sharpened(values.size(), 0.0);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!mask[i]) continue;
            const double c = (values[i] - lo) / slope;
            const int b = static_cast<int>(c);
            if (b < bins - 1)
                sharpened[i] = expectation[b] + (expectation[b + 1] - expectation[b]) * (c - b);
            else
                sharpened[i] = expectation[bins - 1];
        }
        return sharpened;
    }
};

double ratio_coefficient_of_variation(const std::vector<double>& piece, const std::vector<std::uint8_t>& mask) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < piece.size(); ++i) {
        if (!mask[i]) continue;
        const double r = std::exp(-piece[i]);  // ratio of successive field estimates
        sum += r;
        sum2 += r * r;
        ++n;
    }
    const double mu = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - mu * mu);
    return std::sqrt(var) / mu;
}

}  // namespace

void N4Settings::validate() const {
    if (fitting_levels < 1) fail(errc::settings, "n4: fitting_levels must be >= 1");
    if (max_iterations_per_level < 1) fail(errc::settings, "n4: max_iterations_per_level must be >= 1");
    if (!(convergence_threshold > 0.0)) fail(errc::settings, "n4: convergence_threshold must be positive");
    if (histogram_bins < 8) fail(errc::settings, "n4: histogram_bins must be >= 8");
    if (bspline_grid < 4) fail(errc::settings, "n4: bspline_grid must be >= 4 (one span)");
    if (!(wiener_noise > 0.0)) fail(errc::settings, "n4: wiener_noise must be positive");
    if (!(fwhm > 0.0)) fail(errc::settings, "n4: fwhm must be positive");
}

N4Result n4_correct(const Volume& input, const LabelVolume& mask, const N4Settings& settings) {
    settings.validate();
    const Geometry& g = input.geometry();
    if (!g.same_grid(mask.geometry())) fail(errc::pairing, "n4: mask geometry does not match input");

    const std::size_t n = input.size();
    std::vector<std::uint8_t> m(n);
    std::size_t mask_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = mask[i] != 0 ? 1 : 0;
        mask_count += m[i];
    }
    if (mask_count == 0) fail(errc::empty_mask, "n4: mask is empty");
    for (std::size_t i = 0; i < n; ++i)
        if (input[i] < 0.0f) fail(errc::settings, "n4: input intensities must be non-negative");

    // log-intensity image; non-positive voxels inside the mask contribute 0
    std::vector<double> log_input(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!m[i]) continue;
        const double v = input[i];
        log_input[i] = v > 0.0 ? std::log(v) : 0.0;
    }

    const Sharpener sharpener{settings.histogram_bins, settings.fwhm, settings.wiener_noise};

    N4Result result;
    std::vector<double> log_field(n, 0.0);
    std::vector<double> log_corrected = log_input;
    std::vector<double> piece_eval(n, 0.0);

    const int base_spans = settings.bspline_grid - 3;
    for (int level = 0; level < settings.fitting_levels; ++level) {
        const int spans_axis = base_spans << level;
        const std::array<int, 3> spans{spans_axis, spans_axis, spans_axis};
        BSplineFieldLevel accumulated = BSplineFieldLevel::zero(spans);

        for (int iter = 0; iter < settings.max_iterations_per_level; ++iter) {
            ++result.iterations;
            const std::vector<double> sharpened = sharpener.apply(log_corrected, m);

            std::vector<double> residual(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (m[i]) residual[i] = log_corrected[i] - sharpened[i];

            const BSplineFieldLevel piece = fit_scalar_spline(g, residual, m, spans);
            std::fill(piece_eval.begin(), piece_eval.end(), 0.0);
            add_spline_evaluation(piece, g, piece_eval);

            add_lattice(accumulated, piece);
            for (std::size_t i = 0; i < n; ++i) {
                log_field[i] += piece_eval[i];
                log_corrected[i] = log_input[i] - log_field[i];
            }

            const double cv = ratio_coefficient_of_variation(piece_eval, m);
            if (!std::isfinite(cv))
                fail(errc::numerical_failure, "n4: non-finite convergence measure at level " +
                                                  std::to_string(level) + " iteration " + std::to_string(iter));
            result.convergence.push_back(cv);
            if (cv < settings.convergence_threshold) break;
        }
        result.levels.push_back(std::move(accumulated));
    }

    // The returned field is exactly the spline representation: re-evaluate
    // the accumulated lattices once so incremental summation noise cannot
    // leak into the result.
    std::fill(log_field.begin(), log_field.end(), 0.0);
    for (const BSplineFieldLevel& level : result.levels) add_spline_evaluation(level, g, log_field);

    // normalize the multiplicative field to mean 1 over the mask
    double field_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (m[i]) field_sum += std::exp(log_field[i]);
    const double field_mean = field_sum / static_cast<double>(mask_count);
    result.log_norm = std::log(field_mean);

    std::vector<float> field(n), corrected(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = std::exp(log_field[i] - result.log_norm);
        if (!(f > 0.0) || !std::isfinite(f))
            fail(errc::numerical_failure, "n4: non-positive field value at linear index " + std::to_string(i));
        field[i] = static_cast<float>(f);
        corrected[i] = static_cast<float>(input[i] / f);
    }
    result.field = Volume(g, std::move(field));
    result.corrected = Volume(g, std::move(corrected));
    result.corrected.check_finite("n4 corrected");
    return result;
}

}  // namespace voxatlas
