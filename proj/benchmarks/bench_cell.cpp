#include <benchmark/benchmark.h>

#include "g2lstm/network.hpp"

using namespace g2lstm;

namespace {

Model desk_model(GateMode mode) {
    ModelConfig mc;
    mc.vocab_size = 64;
    mc.embed_dim = 256;
    mc.hidden_dim = 256;
    mc.num_layers = 2;
    mc.gate_mode = mode;
    return init_model(mc, 1);
}

WindowBatch desk_window(std::size_t len, std::size_t batch) {
    WindowBatch w;
    w.batch = batch;
    w.len = len;
    w.inputs.resize(len * batch);
    w.targets.resize(len * batch);
    RngState rng(7);
    for (auto& id : w.inputs) id = static_cast<std::int32_t>(rng.next_u64() % 64);
    for (auto& id : w.targets) id = static_cast<std::int32_t>(rng.next_u64() % 64);
    return w;
}

void BM_forward_window(benchmark::State& state) {
    const bool gumbel = state.range(0) != 0;
    const Model m = desk_model(gumbel ? GateMode::gumbel(0.9) : GateMode::standard());
    const WindowBatch win = desk_window(35, 64);
    const LstmState init = zero_state(m.config, 64);
    const RngState root(3);
    for (auto _ : state) {
        ForwardResult r = forward_sequence(m, win, init, /*training=*/true, root);
        benchmark::DoNotOptimize(r.loss);
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * 35 * 64);
}
BENCHMARK(BM_forward_window)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_train_step(benchmark::State& state) {
    const Model m = desk_model(GateMode::gumbel(0.9));
    const WindowBatch win = desk_window(35, 64);
    const LstmState init = zero_state(m.config, 64);
    const RngState root(3);
    for (auto _ : state) {
        ForwardResult fwd = forward_sequence(m, win, init, /*training=*/true, root);
        ModelGrads grads = backward_sequence(m, fwd);
        benchmark::DoNotOptimize(grads.out_b.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * 35 * 64);
}
BENCHMARK(BM_train_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
