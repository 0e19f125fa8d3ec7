#include <benchmark/benchmark.h>

#include "voxatlas/rng.hpp"
#include "voxatlas/sampling.hpp"

using namespace voxatlas;

namespace {

Volume random_volume(int n, std::uint64_t seed) {
    Geometry g;
    g.dims = {n, n, n};
    Rng rng(seed);
    std::vector<float> data(g.voxel_count());
    for (float& v : data) v = static_cast<float>(rng.uniform(0, 100));
    return Volume(g, std::move(data));
}

}  // namespace

static void BM_ResampleTrilinear(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Volume v = random_volume(n, 1);
    RigidTransform t;
    t.rotation = {0.05, -0.03, 0.08};
    t.translation = {1.5, -2.0, 0.7};
    t.center = grid_center(v.geometry());
    for (auto _ : state) {
        Volume out = resample(v, Transform{t}, v.geometry());
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * v.size());
}
BENCHMARK(BM_ResampleTrilinear)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_GaussianSmooth(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Volume v = random_volume(n, 2);
    for (auto _ : state) {
        Volume out = gaussian_smooth(v, {2.0, 2.0, 2.0});
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_GaussianSmooth)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
