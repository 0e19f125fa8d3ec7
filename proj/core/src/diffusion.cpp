#include "voxatlas/diffusion.hpp"

#include <cmath>
#include <vector>

#include "voxatlas/error.hpp"
#include "voxatlas/parallel.hpp"

namespace voxatlas {

void DiffusionSettings::validate() const {
    if (iterations < 0) fail(errc::settings, "diffusion: iterations must be >= 0");
    if (!(kappa > 0.0)) fail(errc::settings, "diffusion: kappa must be positive");
    if (!(dt > 0.0) || dt > 1.0 / 6.0 + 1e-12)
        fail(errc::settings, "diffusion: dt must lie in (0, 1/6] for 3D explicit stability");
}

Volume anisotropic_diffusion(const Volume& input, const DiffusionSettings& settings) {
    settings.validate();
    if (settings.iterations == 0) return input;

    const Geometry& g = input.geometry();
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::size_t n = input.size();

    std::vector<double> cur(input.data().begin(), input.data().end());
    std::vector<double> next(n);

    const double inv_kappa = 1.0 / settings.kappa;
    const bool exponential = settings.conduction == Conduction::exponential;
    auto conductance = [&](double grad_mm) {
        const double s = grad_mm * inv_kappa;
        const double s2 = s * s;
        return exponential ? std::exp(-s2) : 1.0 / (1.0 + s2);
    };

    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(nx);
    const std::size_t sz = static_cast<std::size_t>(nx) * ny;
    const double inv_h[3] = {1.0 / g.spacing[0], 1.0 / g.spacing[1], 1.0 / g.spacing[2]};

    for (int it = 0; it < settings.iterations; ++it) {
        parallel_for(static_cast<std::size_t>(nz), [&](std::size_t k) {
            std::size_t idx = k * sz;
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i, ++idx) {
                    const double c = cur[idx];
                    double flux = 0.0;
                    // face flux g(|d|/h) * d toward each 6-neighbor; missing
                    // neighbors contribute nothing (zero-flux boundary)
                    if (i + 1 < nx) {
                        const double d = cur[idx + sx] - c;
                        flux += conductance(std::abs(d) * inv_h[0]) * d;
                    }
                    if (i > 0) {
                        const double d = cur[idx - sx] - c;
                        flux += conductance(std::abs(d) * inv_h[0]) * d;
                    }
                    if (j + 1 < ny) {
                        const double d = cur[idx + sy] - c;
                        flux += conductance(std::abs(d) * inv_h[1]) * d;
                    }
                    if (j > 0) {
                        const double d = cur[idx - sy] - c;
                        flux += conductance(std::abs(d) * inv_h[1]) * d;
                    }
                    if (static_cast<int>(k) + 1 < nz) {
                        const double d = cur[idx + sz] - c;
                        flux += conductance(std::abs(d) * inv_h[2]) * d;
                    }
                    if (k > 0) {
                        const double d = cur[idx - sz] - c;
                        flux += conductance(std::abs(d) * inv_h[2]) * d;
                    }
                    next[idx] = c + settings.dt * flux;
                }
            }
        });
        cur.swap(next);
    }

    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(cur[i]);
    return Volume(g, std::move(out));
}

}  // namespace voxatlas
