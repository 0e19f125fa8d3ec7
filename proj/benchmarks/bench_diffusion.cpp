#include <benchmark/benchmark.h>

#include "voxatlas/diffusion.hpp"
#include "voxatlas/rng.hpp"

using namespace voxatlas;

static void BM_AnisotropicDiffusion(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Geometry g;
    g.dims = {n, n, n};
    Rng rng(7);
    std::vector<float> data(g.voxel_count());
    for (float& v : data) v = static_cast<float>(100.0 + 10.0 * rng.normal());
    const Volume v(g, std::move(data));

    DiffusionSettings s;
    s.iterations = 10;
    for (auto _ : state) {
        Volume out = anisotropic_diffusion(v, s);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * v.size() * s.iterations);
}
BENCHMARK(BM_AnisotropicDiffusion)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
