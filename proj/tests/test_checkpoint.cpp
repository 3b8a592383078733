#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "g2lstm/checkpoint.hpp"

#include <cstdio>

using namespace g2lstm;

namespace {

Model sample_model(bool tied = false, GateMode mode = GateMode::gumbel(0.9)) {
    ModelConfig mc;
    mc.vocab_size = 6;
    mc.embed_dim = tied ? 5 : 4;
    mc.hidden_dim = 5;
    mc.num_layers = 2;
    mc.gate_mode = mode;
    mc.tie_embeddings = tied;
    mc.dropout_p = 0.25;
    return init_model(mc, 77);
}

Vocabulary sample_vocab() {
    // Includes a multi-byte UTF-8 token.
    return Vocabulary::build({"a", "b", "\xc3\xa9", "\n"});
}

}  // namespace

TEST_CASE("save-load-save is byte-identical") {
    const Model m = sample_model();
    const Vocabulary v = sample_vocab();
    const auto bytes = save_checkpoint(m, v);
    const LoadedCheckpoint loaded = load_checkpoint(bytes);
    CHECK(loaded.vocab == v);
    CHECK(loaded.model.config.gate_mode.kind == GateMode::Kind::gumbel_gate);
    CHECK(loaded.model.config.gate_mode.tau == 0.9);
    CHECK(loaded.model.config.dropout_p == 0.25);
    const auto bytes2 = save_checkpoint(loaded.model, loaded.vocab);
    CHECK(bytes == bytes2);
}

TEST_CASE("tied models round-trip with a consistent mirror") {
    const Model m = sample_model(/*tied=*/true);
    const auto bytes = save_checkpoint(m, sample_vocab());
    const LoadedCheckpoint loaded = load_checkpoint(bytes);
    CHECK(loaded.model.config.tie_embeddings);
    CHECK(loaded.model.out_w.flat() == loaded.model.embedding.flat());
}

TEST_CASE("bad magic is rejected") {
    auto bytes = save_checkpoint(sample_model(), sample_vocab());
    bytes[0] ^= 0xff;
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("unsupported version is rejected") {
    auto bytes = save_checkpoint(sample_model(), sample_vocab());
    bytes[4] = 9;
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("version"), std::runtime_error);
}

TEST_CASE("truncated payload names the offset") {
    const auto bytes = save_checkpoint(sample_model(), sample_vocab());
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 7);
    CHECK_THROWS_WITH_AS(load_checkpoint(cut), doctest::Contains("offset"), std::runtime_error);
}

TEST_CASE("trailing bytes are rejected") {
    auto bytes = save_checkpoint(sample_model(), sample_vocab());
    bytes.push_back(0);
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("trailing"),
                         std::runtime_error);
}

TEST_CASE("header inconsistencies are rejected") {
    // Vocabulary count lives right after the 48-byte header; make it disagree
    // with the header's vocab_size.
    auto bytes = save_checkpoint(sample_model(), sample_vocab());
    bytes[48] += 1;
    CHECK_THROWS_WITH_AS(load_checkpoint(bytes), doctest::Contains("vocab"), std::runtime_error);
}

TEST_CASE("vocabulary size must match the model") {
    const Model m = sample_model();
    const Vocabulary small = Vocabulary::build({"a"});
    CHECK_THROWS_AS(save_checkpoint(m, small), std::invalid_argument);
}

TEST_CASE("file round-trip preserves evaluation exactly") {
    const Model m = sample_model();
    const Vocabulary v = sample_vocab();
    std::vector<std::int32_t> stream;
    for (int i = 0; i < 240; ++i) stream.push_back(i % 6);
    const double before = perplexity_eval(m, stream, 4, 12);

    const std::string path = "ckpt_roundtrip_test.g2lm";
    save_checkpoint_file(path, m, v);
    const LoadedCheckpoint loaded = load_checkpoint_file(path);
    std::remove(path.c_str());
    const double after = perplexity_eval(loaded.model, stream, 4, 12);
    CHECK(before == after);
}
