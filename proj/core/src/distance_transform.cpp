#include "voxatlas/distance_transform.hpp"

#include <limits>

#include "voxatlas/error.hpp"
#include "voxatlas/parallel.hpp"

namespace voxatlas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One lower-envelope pass over a line of squared distances. Positions are
// i*h. Parabola boundaries are kept as exact rationals (num/den, den > 0) so
// the winning parabola is decided without rounding.
struct LinePass {
    std::vector<int> v;         // parabola roots (indices into the line)
    std::vector<double> znum;   // left boundary of parabola k, as num/den
    std::vector<double> zden;   // den == 0 encodes -infinity for k == 0

    void run(std::span<const double> g, double h, std::span<double> out) {
        const int n = static_cast<int>(g.size());
        v.clear();
        znum.assign(static_cast<std::size_t>(n) + 1, 0.0);
        zden.assign(static_cast<std::size_t>(n) + 1, 0.0);

        for (int q = 0; q < n; ++q) {
            if (g[q] == kInf) continue;
            const double xq = q * h;
            const double fq = g[q] + xq * xq;
            while (!v.empty()) {
                const int p = v.back();
                const double xp = p * h;
                // intersection s = (fq - fp) / (2(xq - xp)); pop while s <= z[k]
                const double num = fq - (g[p] + xp * xp);
                const double den = 2.0 * (xq - xp);
                const std::size_t k = v.size() - 1;
                bool pop;
                if (zden[k] == 0.0) {
                    pop = false;  // z[0] = -inf, a finite s can never be <= it
                } else {
                    pop = num * zden[k] <= znum[k] * den;
                }
                if (!pop) {
                    znum[v.size()] = num;
                    zden[v.size()] = den;
                    break;
                }
                v.pop_back();
            }
            if (v.empty()) {
                znum[0] = 0.0;
                zden[0] = 0.0;  // -inf
            }
            v.push_back(q);
        }

        if (v.empty()) {
            for (int q = 0; q < n; ++q) out[q] = kInf;
            return;
        }

        std::size_t k = 0;
        for (int q = 0; q < n; ++q) {
            const double xq = q * h;
            // advance while the next parabola's left boundary is < xq
            while (k + 1 < v.size() && znum[k + 1] < xq * zden[k + 1]) ++k;
            const double dx = xq - v[k] * h;
            out[q] = dx * dx + g[v[k]];
        }
    }
};

}  // namespace

std::vector<double> squared_distance_transform(const Geometry& g, std::span<const std::uint8_t> sites) {
    if (sites.size() != g.voxel_count()) fail(errc::settings, "distance transform: mask size mismatch");

    const int n[3] = {g.dims[0], g.dims[1], g.dims[2]};
    const std::size_t stride[3] = {1, static_cast<std::size_t>(n[0]),
                                   static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1])};

    std::vector<double> dist(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) dist[i] = sites[i] ? 0.0 : kInf;

    for (int axis = 0; axis < 3; ++axis) {
        const int na = n[axis];
        if (na == 1) continue;
        const std::size_t sa = stride[axis];
        const int nb = n[(axis + 1) % 3];
        const int nc = n[(axis + 2) % 3];
        const std::size_t sb = stride[(axis + 1) % 3];
        const std::size_t sc = stride[(axis + 2) % 3];
        const double h = g.spacing[axis];

        parallel_for(static_cast<std::size_t>(nc), [&](std::size_t c) {
            LinePass pass;
            std::vector<double> line(na), out(na);
            for (int b = 0; b < nb; ++b) {
                const std::size_t base = c * sc + static_cast<std::size_t>(b) * sb;
                for (int a = 0; a < na; ++a) line[a] = dist[base + a * sa];
                pass.run(line, h, out);
                for (int a = 0; a < na; ++a) dist[base + a * sa] = out[a];
            }
        });
    }
    return dist;
}

}  // namespace voxatlas
