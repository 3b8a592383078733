#include <benchmark/benchmark.h>

#include "g2lstm/sampling.hpp"

using namespace g2lstm;

namespace {

void BM_logistic_draws(benchmark::State& state) {
    RngState rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(rng.logistic());
}
BENCHMARK(BM_logistic_draws);

void BM_binary_concrete_256(benchmark::State& state) {
    RngState rng(2);
    Vector alpha(256);
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = 0.01 * double(i) - 1.28;
    for (auto _ : state) {
        auto s = binary_concrete(alpha, 0.9, rng);
        benchmark::DoNotOptimize(s.g.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * 256);
}
BENCHMARK(BM_binary_concrete_256);

void BM_verify_prop1_10k(benchmark::State& state) {
    RngState rng(3);
    for (auto _ : state) {
        Prop1Report rep = verify_prop1(0.5, 0.9, 0.05, 10000, rng);
        benchmark::DoNotOptimize(rep.empirical_upper_tail);
    }
}
BENCHMARK(BM_verify_prop1_10k)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
