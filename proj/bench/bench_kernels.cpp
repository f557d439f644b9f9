#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "geocover/privacy.hpp"
#include "geocover/selection.hpp"

using namespace geocover;

namespace {

Execution mode(const benchmark::State& state) { return state.range(1) ? Execution::parallel : Execution::serial; }

// exhaustive triple check on a side x side grid
void BM_VerifyGeoDp(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    auto g = build_grid(side, side, 1.0);
    const double eps = std::log(4.0);
    auto p = laplace_policy(g, eps);
    VerifyOptions vo;
    vo.execution = mode(state);
    vo.exhaustive_limit = g.size();
    for (auto _ : state) benchmark::DoNotOptimize(verify_geo_dp(p, g, eps, vo));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size() * g.size() * g.size()));
}

// group prior update from a batch of uploads
void BM_MeanPosterior(benchmark::State& state) {
    auto g = build_grid(8, 8, 1.0);
    auto p = laplace_policy(g, std::log(4.0));
    auto pi = PriorDistribution::uniform(g.size());
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<LocationId> loc(0, g.size() - 1);
    std::vector<LocationId> obs(static_cast<std::size_t>(state.range(0)));
    for (auto& o : obs) o = loc(rng);
    for (auto _ : state) benchmark::DoNotOptimize(mean_posterior(pi, p, obs, mode(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_VerifyGeoDp)->ArgsProduct({{5, 8, 12}, {0, 1}})->ArgNames({"side", "parallel"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeanPosterior)->ArgsProduct({{100, 1000, 10000}, {0, 1}})->ArgNames({"uploads", "parallel"});

BENCHMARK_MAIN();
