#include "voxatlas/bspline_field.hpp"

#include <cmath>

#include "voxatlas/error.hpp"
#include "voxatlas/transform.hpp"

namespace voxatlas {

namespace {

struct AxisWeights {
    std::vector<int> cell;                      // span cell per voxel index
    std::vector<std::array<double, 4>> w;       // basis weights per voxel index
};

AxisWeights axis_weights(int dim, int spans) {
    AxisWeights aw;
    aw.cell.resize(dim);
    aw.w.resize(dim);
    for (int i = 0; i < dim; ++i) {
        double u = dim > 1 ? static_cast<double>(i) * spans / (dim - 1) : 0.0;
        int cell = static_cast<int>(u);
        if (cell >= spans) cell = spans - 1;  // u == spans at the last voxel
        aw.cell[i] = cell;
        aw.w[i] = cubic_bspline_weights(u - cell);
    }
    return aw;
}

}  // namespace

BSplineFieldLevel BSplineFieldLevel::zero(const std::array<int, 3>& spans) {
    BSplineFieldLevel l;
    l.spans = spans;
    for (int a = 0; a < 3; ++a) l.cp_dims[a] = spans[a] + 3;
    l.coeff.assign(static_cast<std::size_t>(l.cp_dims[0]) * l.cp_dims[1] * l.cp_dims[2], 0.0);
    return l;
}

BSplineFieldLevel fit_scalar_spline(const Geometry& g, std::span<const double> values,
                                    std::span<const std::uint8_t> mask, const std::array<int, 3>& spans) {
    if (values.size() != g.voxel_count() || mask.size() != g.voxel_count())
        fail(errc::settings, "spline fit: value/mask size mismatch");
    for (int a = 0; a < 3; ++a)
        if (spans[a] < 1) fail(errc::settings, "spline fit: spans must be >= 1");

    BSplineFieldLevel level = BSplineFieldLevel::zero(spans);
    std::vector<double> numer(level.coeff.size(), 0.0);
    std::vector<double> denom(level.coeff.size(), 0.0);

    const AxisWeights ax = axis_weights(g.dims[0], spans[0]);
    const AxisWeights ay = axis_weights(g.dims[1], spans[1]);
    const AxisWeights az = axis_weights(g.dims[2], spans[2]);
    const int cpx = level.cp_dims[0], cpy = level.cp_dims[1];

    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                if (!mask[idx]) continue;
                const auto& wx = ax.w[i];
                const auto& wy = ay.w[j];
                const auto& wz = az.w[k];

                double sum_w2 = 0.0;
                for (int c = 0; c < 4; ++c)
                    for (int b = 0; b < 4; ++b)
                        for (int a = 0; a < 4; ++a) {
                            const double w = wx[a] * wy[b] * wz[c];
                            sum_w2 += w * w;
                        }

                const double z = values[idx];
                for (int c = 0; c < 4; ++c) {
                    const std::size_t zo = static_cast<std::size_t>(az.cell[k] + c) * cpy;
                    for (int b = 0; b < 4; ++b) {
                        const std::size_t yo = (zo + static_cast<std::size_t>(ay.cell[j] + b)) * cpx;
                        for (int a = 0; a < 4; ++a) {
                            const double w = wx[a] * wy[b] * wz[c];
                            const double w2 = w * w;
                            const std::size_t cp = yo + static_cast<std::size_t>(ax.cell[i] + a);
                            // phi proposal w*z/sum_w2 averaged with weight w^2
                            numer[cp] += w2 * (w * z / sum_w2);
                            denom[cp] += w2;
                        }
                    }
                }
            }
        }
    }

    for (std::size_t c = 0; c < level.coeff.size(); ++c)
        level.coeff[c] = denom[c] > 0.0 ? numer[c] / denom[c] : 0.0;
    return level;
}

void add_spline_evaluation(const BSplineFieldLevel& level, const Geometry& g, std::span<double> accum) {
    if (accum.size() != g.voxel_count()) fail(errc::settings, "spline eval: accumulator size mismatch");

    const AxisWeights ax = axis_weights(g.dims[0], level.spans[0]);
    const AxisWeights ay = axis_weights(g.dims[1], level.spans[1]);
    const AxisWeights az = axis_weights(g.dims[2], level.spans[2]);
    const int cpx = level.cp_dims[0], cpy = level.cp_dims[1];

    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            // collapse y/z weights once per row
            std::array<std::array<double, 4>, 4> wyz;
            for (int c = 0; c < 4; ++c)
                for (int b = 0; b < 4; ++b) wyz[c][b] = ay.w[j][b] * az.w[k][c];
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                const auto& wx = ax.w[i];
                double acc = 0.0;
                for (int c = 0; c < 4; ++c) {
                    const std::size_t zo = static_cast<std::size_t>(az.cell[k] + c) * cpy;
                    for (int b = 0; b < 4; ++b) {
                        const std::size_t yo = (zo + static_cast<std::size_t>(ay.cell[j] + b)) * cpx;
                        const double wbc = wyz[c][b];
                        const std::size_t base = yo + static_cast<std::size_t>(ax.cell[i]);
                        acc += wbc * (wx[0] * level.coeff[base] + wx[1] * level.coeff[base + 1] +
                                      wx[2] * level.coeff[base + 2] + wx[3] * level.coeff[base + 3]);
                    }
                }
                accum[idx] += acc;
            }
        }
    }
}

void add_lattice(BSplineFieldLevel& into, const BSplineFieldLevel& from) {
    if (into.cp_dims != from.cp_dims) fail(errc::settings, "lattice sum: shape mismatch");
    for (std::size_t i = 0; i < into.coeff.size(); ++i) into.coeff[i] += from.coeff[i];
}

}  // namespace voxatlas
