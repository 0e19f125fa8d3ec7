#include <benchmark/benchmark.h>

#include "voxatlas/mutual_information.hpp"
#include "voxatlas/phantom.hpp"
#include "voxatlas/sampling.hpp"

using namespace voxatlas;

static void BM_MutualInformation(benchmark::State& state) {
    PhantomSpec spec;
    const int n = static_cast<int>(state.range(0));
    spec.dims = {n, n, n};
    const double s = n / 64.0;
    spec.wm_radii = {15.0 * s, 12.0 * s, 13.5 * s};
    spec.gm_radii = {20.0 * s, 16.5 * s, 18.0 * s};
    spec.csf_radii = {24.0 * s, 20.0 * s, 22.0 * s};
    spec.noise_sigma = 3.0;
    spec.seed = 1;
    const Volume fixed = generate_phantom(spec).first;
    spec.seed = 2;
    const Volume moving = generate_phantom(spec).first;

    for (auto _ : state) {
        benchmark::DoNotOptimize(mutual_information(fixed, moving, identity_transform(), 32));
    }
    state.SetItemsProcessed(state.iterations() * fixed.size());
}
BENCHMARK(BM_MutualInformation)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
