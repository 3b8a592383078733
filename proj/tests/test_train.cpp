#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "g2lstm/checkpoint.hpp"
#include "g2lstm/train.hpp"

#include <cmath>

using namespace g2lstm;

namespace {

ModelConfig small_config(GateMode mode = GateMode::gumbel(0.9)) {
    ModelConfig mc;
    mc.vocab_size = 6;
    mc.embed_dim = 5;
    mc.hidden_dim = 5;
    mc.num_layers = 2;
    mc.gate_mode = mode;
    return mc;
}

std::vector<std::int32_t> toy_tokens(std::size_t n) {
    std::vector<std::int32_t> t(n);
    RngState rng(13);
    for (auto& id : t) id = static_cast<std::int32_t>(rng.next_u64() % 6);
    return t;
}

ModelGrads grads_like(const ModelConfig& mc, double fill) {
    ModelGrads g = zero_grads(mc);
    for_each_tensor(g, [&](const std::string&, std::vector<double>& d) {
        std::fill(d.begin(), d.end(), fill);
    });
    return g;
}

}  // namespace

TEST_CASE("clip leaves small gradients untouched") {
    ModelConfig mc = small_config();
    ModelGrads g = zero_grads(mc);
    g.out_b[0] = 1.0;
    const ModelGrads before = g;
    const double pre = clip_global_norm(g, 2.0);
    CHECK(pre == 1.0);
    CHECK(g.out_b == before.out_b);
}

TEST_CASE("clip rescales a [3,4] gradient to the cap") {
    ModelConfig mc = small_config();
    ModelGrads g = zero_grads(mc);
    g.out_b[0] = 3.0;
    g.out_b[1] = 4.0;
    const double pre = clip_global_norm(g, 2.0);
    CHECK(pre == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(g.out_b[0] == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(g.out_b[1] == doctest::Approx(1.6).epsilon(1e-12));
}

TEST_CASE("clip of zero gradients reports zero norm") {
    ModelConfig mc = small_config();
    ModelGrads g = zero_grads(mc);
    CHECK(clip_global_norm(g, 2.0) == 0.0);
    for_each_tensor(g, [](const std::string&, std::vector<double>& d) {
        for (double v : d) CHECK(v == 0.0);
    });
}

TEST_CASE("clipping never increases the global norm") {
    ModelConfig mc = small_config();
    RngState rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        ModelGrads g = zero_grads(mc);
        for_each_tensor(g, [&](const std::string&, std::vector<double>& d) {
            for (double& v : d) v = (2.0 * rng.uniform() - 1.0) * 3.0;
        });
        const double pre = clip_global_norm(g, 2.0);
        double sq = 0.0;
        for_each_tensor(g, [&](const std::string&, std::vector<double>& d) {
            for (double v : d) sq += v * v;
        });
        CHECK(std::sqrt(sq) <= std::min(pre, 2.0) + 1e-12);
    }
}

TEST_CASE("zero gradients leave both optimizers fixed") {
    const ModelConfig mc = small_config();
    const ModelGrads zero = zero_grads(mc);

    Model sgd_model = init_model(mc, 4);
    const Model sgd_before = sgd_model;
    Optimizer sgd(mc, SgdConfig{0.5, 0.5, 2});
    sgd.apply(sgd_model, zero);
    CHECK(sgd_model.out_b == sgd_before.out_b);
    CHECK(sgd_model.embedding.flat() == sgd_before.embedding.flat());

    Model adam_model = init_model(mc, 4);
    const Model adam_before = adam_model;
    Optimizer adam(mc, AdamConfig{});
    adam.apply(adam_model, zero);
    CHECK(adam_model.embedding.flat() == adam_before.embedding.flat());
    CHECK(adam_model.layers[0].w_xf.flat() == adam_before.layers[0].w_xf.flat());
}

TEST_CASE("nonzero gradients move Adam parameters") {
    const ModelConfig mc = small_config();
    Model m = init_model(mc, 4);
    const Model before = m;
    Optimizer adam(mc, AdamConfig{});
    adam.apply(m, grads_like(mc, 0.01));
    CHECK(m.embedding.flat() != before.embedding.flat());
}

TEST_CASE("lr=0 training is a no-op on parameters") {
    const ModelConfig mc = small_config();
    const Model before = init_model(mc, 9);
    TrainConfig tc;
    tc.optimizer = SgdConfig{0.0, 0.5, 2};
    tc.epochs = 1;
    tc.window = 8;
    tc.batch = 3;
    tc.seed = 9;
    const auto tokens = toy_tokens(200);
    const TrainResult r = train_loop(before, tokens, tokens, tc);
    bool identical = true;
    std::vector<const std::vector<double>*> a, b;
    for_each_tensor(before, [&](const std::string&, const std::vector<double>& d) { a.push_back(&d); });
    for_each_tensor(r.final_model,
                    [&](const std::string&, const std::vector<double>& d) { b.push_back(&d); });
    for (std::size_t i = 0; i < a.size(); ++i) identical = identical && (*a[i] == *b[i]);
    CHECK(identical);
}

TEST_CASE("same seed and config reproduce identical checkpoint bytes") {
    const ModelConfig mc = small_config();
    TrainConfig tc;
    tc.optimizer = AdamConfig{5e-3, 0.9, 0.999, 1e-8};
    tc.epochs = 2;
    tc.window = 8;
    tc.batch = 4;
    tc.seed = 123;
    const auto tokens = toy_tokens(400);
    const auto valid = toy_tokens(120);

    Vocabulary vocab = Vocabulary::build({"a", "b", "c", "d"});
    const TrainResult r1 = train_loop(init_model(mc, tc.seed), tokens, valid, tc);
    const TrainResult r2 = train_loop(init_model(mc, tc.seed), tokens, valid, tc);
    CHECK(save_checkpoint(r1.model, vocab) == save_checkpoint(r2.model, vocab));
}

TEST_CASE("training reduces loss on a learnable stream") {
    const ModelConfig mc = small_config(GateMode::gumbel(0.9));
    TrainConfig tc;
    tc.optimizer = AdamConfig{5e-3, 0.9, 0.999, 1e-8};
    tc.epochs = 6;
    tc.window = 8;
    tc.batch = 4;
    tc.seed = 3;
    // Periodic stream: highly predictable.
    std::vector<std::int32_t> tokens(600);
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<std::int32_t>(i % 6);
    const TrainResult r = train_loop(init_model(mc, 3), tokens, tokens, tc);
    CHECK(r.log.front().train_loss > r.log.back().train_loss);
    CHECK(r.best_val_ppl < 6.0);  // uniform baseline
}

TEST_CASE("best-val checkpoint is at least as good as the final model") {
    const ModelConfig mc = small_config(GateMode::standard());
    TrainConfig tc;
    tc.optimizer = AdamConfig{2e-2, 0.9, 0.999, 1e-8};
    tc.epochs = 4;
    tc.window = 8;
    tc.batch = 4;
    tc.seed = 31;
    tc.eval_every = 3;
    const auto tokens = toy_tokens(400);
    const auto valid = toy_tokens(150);
    const TrainResult r = train_loop(init_model(mc, 31), tokens, valid, tc);
    const double best_ppl = perplexity_eval(r.model, valid, tc.batch, tc.window);
    const double final_ppl = perplexity_eval(r.final_model, valid, tc.batch, tc.window);
    CHECK(best_ppl == doctest::Approx(r.best_val_ppl).epsilon(1e-12));
    CHECK(best_ppl <= final_ppl + 1e-12);
}

TEST_CASE("divergence aborts with a diagnostic") {
    const ModelConfig mc = small_config(GateMode::standard());
    Model m = init_model(mc, 5);
    m.embedding.flat()[0] = std::nan("");
    TrainConfig tc;
    tc.optimizer = SgdConfig{0.1, 0.5, 2};
    tc.epochs = 1;
    tc.window = 8;
    tc.batch = 3;
    const auto tokens = toy_tokens(120);
    CHECK_THROWS_WITH_AS(train_loop(m, tokens, tokens, tc), doctest::Contains("diverged"),
                         std::runtime_error);
}

TEST_CASE("train log rows are monotone in step and CSV-shaped") {
    const ModelConfig mc = small_config(GateMode::standard());
    TrainConfig tc;
    tc.optimizer = AdamConfig{};
    tc.epochs = 1;
    tc.window = 8;
    tc.batch = 4;
    const auto tokens = toy_tokens(300);
    const TrainResult r = train_loop(init_model(mc, 8), tokens, tokens, tc);
    REQUIRE(!r.log.empty());
    for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].step >= r.log[i - 1].step);
    CHECK(train_log_csv_header() == "step,train_loss,val_ppl,grad_norm_preclip,wallclock_s");
    const std::string row = train_log_csv_row(r.log.front());
    CHECK(std::count(row.begin(), row.end(), ',') == 4);
}
