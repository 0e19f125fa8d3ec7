#include <benchmark/benchmark.h>

#include "voxatlas/metrics.hpp"
#include "voxatlas/rng.hpp"

using namespace voxatlas;

namespace {

LabelVolume random_labels(int n, std::uint64_t seed) {
    Geometry g;
    g.dims = {n, n, n};
    g.spacing = {1.0, 1.25, 1.5};
    Rng rng(seed);
    std::vector<std::uint8_t> data(g.voxel_count());
    for (auto& v : data) v = rng.uniform() < 0.5 ? 0 : static_cast<std::uint8_t>(1 + rng.below(3));
    return LabelVolume(g, std::move(data));
}

}  // namespace

static void BM_Hausdorff(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const LabelVolume a = random_labels(n, 1);
    const LabelVolume b = random_labels(n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hausdorff(a, b, 2));
    }
}
BENCHMARK(BM_Hausdorff)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_EvaluateAllMetrics(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const LabelVolume a = random_labels(n, 3);
    const LabelVolume b = random_labels(n, 4);
    for (auto _ : state) {
        MetricsReport r = evaluate(a, b);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_EvaluateAllMetrics)->Arg(64)->Unit(benchmark::kMillisecond);
