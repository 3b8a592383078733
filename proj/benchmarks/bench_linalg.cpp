#include <benchmark/benchmark.h>

#include "g2lstm/linalg.hpp"
#include "g2lstm/rng.hpp"
#include "g2lstm/svd.hpp"

using namespace g2lstm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    RngState rng(seed);
    Matrix m(r, c);
    for (double& v : m.flat()) v = 2.0 * rng.uniform() - 1.0;
    return m;
}

void BM_matmul_gate_shapes(benchmark::State& state) {
    // The fused per-timestep product of a hidden-256 layer at batch 64.
    const Matrix w = random_matrix(1024, 256, 1);
    const Matrix h = random_matrix(256, 64, 2);
    for (auto _ : state) {
        Matrix c = matmul(w, h);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * 1024 * 256 * 64 * 2);
}
BENCHMARK(BM_matmul_gate_shapes);

void BM_matmul_square(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 3);
    const Matrix b = random_matrix(n, n, 4);
    for (auto _ : state) {
        Matrix c = matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_matmul_square)->Arg(64)->Arg(256);

void BM_svd_256(benchmark::State& state) {
    const Matrix m = random_matrix(256, 256, 5);
    for (auto _ : state) {
        SvdResult s = svd(m);
        benchmark::DoNotOptimize(s.s.data());
    }
}
BENCHMARK(BM_svd_256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
