#include <benchmark/benchmark.h>

#include <omp.h>

#include "simdis/losses.hpp"
#include "simdis/random.hpp"

using namespace simdis;

namespace {

ContrastiveBatch make_batch(std::size_t samples) {
    Rng rng(17);
    RandomBatchOptions o;
    o.samples = samples;
    o.dim = 128;
    o.universe = 20;
    o.max_labels = 4;
    o.temperature = 0.07;
    o.paired_views = true;
    return random_batch(rng, o);
}

void run(benchmark::State& state, const Strategy& strategy, Backend backend) {
    const auto batch = make_batch(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto r = compute_loss(batch, strategy, backend);
        benchmark::DoNotOptimize(r.total);
        benchmark::DoNotOptimize(r.gradient.data());
    }
    state.counters["threads"] = backend == Backend::Serial ? 1 : omp_get_max_threads();
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Serial(benchmark::State& state, Strategy strategy) { run(state, strategy, Backend::Serial); }
void BM_Parallel(benchmark::State& state, Strategy strategy) { run(state, strategy, Backend::Parallel); }

}  // namespace

#define SIMDIS_BENCH(name, strategy)                                                       \
    BENCHMARK_CAPTURE(BM_Serial, name, strategy)->RangeMultiplier(2)->Range(64, 512);   \
    BENCHMARK_CAPTURE(BM_Parallel, name, strategy)->RangeMultiplier(2)->Range(64, 512)

SIMDIS_BENCH(any, Strategy::any());
SIMDIS_BENCH(mulsupcon, Strategy::mulsupcon());
SIMDIS_BENCH(outside_log, Strategy::simdis(Placement::OutsideLog));

BENCHMARK_MAIN();
