#include <molcomm/channel.hpp>
#include <molcomm/fisher.hpp>
#include <molcomm/ml.hpp>
#include <molcomm/random.hpp>
#include <molcomm/sim.hpp>

#include <benchmark/benchmark.h>

#include <vector>

using namespace molcomm;

namespace {

std::vector<double> uniform_times(int m) {
    std::vector<double> out;
    for (int i = 1; i <= m; ++i) out.push_back(10.0 * i / m / 1000.0);
    return out;
}

void BM_ExpectedObservations(benchmark::State& state) {
    const ChannelParams p = ChannelParams::reference();
    double t = 2e-3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(expected_observations(p, t));
        t += 1e-12;
    }
}
BENCHMARK(BM_ExpectedObservations);

void BM_FullCrlb(benchmark::State& state) {
    const ChannelParams p = ChannelParams::reference();
    const UnknownSet all{std::span<const ParamId>(kAllParams)};
    const auto times = uniform_times(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(crlb(fim(p, all, times)));
}
BENCHMARK(BM_FullCrlb)->Arg(10)->Arg(100);

void BM_GridSearchDistance(benchmark::State& state) {
    const ChannelParams p = ChannelParams::reference();
    const UnknownSet unknowns{ParamId::Distance};
    Rng rng(1);
    const auto obs = poisson_sample(p, uniform_times(100), rng);
    const auto problem = EstimationProblem::with_default_bounds(unknowns, p, obs);
    const GridSpec grid = GridSpec::defaults(1);
    for (auto _ : state) benchmark::DoNotOptimize(grid_search_ml(problem, obs, grid));
}
BENCHMARK(BM_GridSearchDistance)->Unit(benchmark::kMillisecond);

void BM_ParticleTrial(benchmark::State& state) {
    SimConfig cfg;
    cfg.propagation = state.range(0) == 0 ? Propagation::PerStep : Propagation::SampleSkip;
    cfg.sample_steps = {10, 20, 30};
    const auto start = init_source(cfg);
    Rng rng(2);
    for (auto _ : state) benchmark::DoNotOptimize(run_trial(cfg, start, rng));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(start.size()));
}
BENCHMARK(BM_ParticleTrial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
