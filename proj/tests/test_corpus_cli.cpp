#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "g2lstm/checkpoint.hpp"
#include "g2lstm/cli.hpp"
#include "g2lstm/corpus.hpp"
#include "g2lstm/textgen.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

using namespace g2lstm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("g2lstm_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

void write(const std::string& path, const std::string& text) { write_text_file(path, text); }

// Captures std::cout during a CLI invocation.
struct CapturedRun {
    int exit_code;
    std::string out;
};

CapturedRun run_cli(const std::vector<std::string>& args) {
    std::ostringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    const int code = cli::run(args);
    std::cout.rdbuf(old);
    return {code, captured.str()};
}

void make_tiny_corpus(const TempDir& dir, std::uint64_t seed = 4, std::size_t bytes = 6000) {
    const std::string text = generate_text(seed, bytes);
    const std::size_t n = text.size();
    write(dir.file("train.txt"), text.substr(0, n * 8 / 10));
    write(dir.file("valid.txt"), text.substr(n * 8 / 10, n / 10));
    write(dir.file("test.txt"), text.substr(n * 9 / 10));
}

}  // namespace

TEST_CASE("char corpus from a two-letter text") {
    TempDir dir;
    write(dir.file("train.txt"), "ab\n");
    write(dir.file("valid.txt"), "a");
    write(dir.file("test.txt"), "b");
    const Corpus c = build_corpus(dir.file("train.txt"), dir.file("valid.txt"),
                                  dir.file("test.txt"), TokenizerKind::chars, 1);
    CHECK(c.vocab.size() == 5);  // <unk>, <eos>, a, b, newline
    CHECK(c.train.size() == 3);
    CHECK(c.valid.size() == 1);
}

TEST_CASE("word corpus applies the min-frequency rule and eos") {
    TempDir dir;
    write(dir.file("train.txt"), "the cat\nthe dog\n");
    write(dir.file("valid.txt"), "the bird\n");
    write(dir.file("test.txt"), "dog\n");
    const Corpus c = build_corpus(dir.file("train.txt"), dir.file("valid.txt"),
                                  dir.file("test.txt"), TokenizerKind::words, 2);
    CHECK(c.vocab.token_to_id.count("the") == 1);
    CHECK(c.vocab.token_to_id.count("cat") == 0);
    CHECK(c.vocab.token_to_id.count("dog") == 0);
    // train tokens: the <unk> <eos> the <unk> <eos>
    REQUIRE(c.train.size() == 6);
    CHECK(c.train[0] == c.train[3]);
    CHECK(c.train[1] == c.vocab.unk_id);
    CHECK(c.train[2] == c.vocab.eos_id);
}

TEST_CASE("char-mode ids detokenize to the exact original text") {
    TempDir dir;
    const std::string text = "Hello, caf\xc3\xa9!\nSecond line.\n";
    write(dir.file("train.txt"), text);
    write(dir.file("valid.txt"), "x");
    write(dir.file("test.txt"), "y");
    const Corpus c = build_corpus(dir.file("train.txt"), dir.file("valid.txt"),
                                  dir.file("test.txt"), TokenizerKind::chars, 1);
    CHECK(detokenize(c.train, c.vocab, TokenizerKind::chars) == text);
}

TEST_CASE("corpus build failures are reported") {
    TempDir dir;
    write(dir.file("train.txt"), "");
    write(dir.file("valid.txt"), "a");
    write(dir.file("test.txt"), "b");
    CHECK_THROWS_WITH_AS(build_corpus(dir.file("train.txt"), dir.file("valid.txt"),
                                      dir.file("test.txt"), TokenizerKind::chars, 1),
                         doctest::Contains("empty train split"), std::runtime_error);
    CHECK_THROWS_WITH_AS(build_corpus(dir.file("missing.txt"), dir.file("valid.txt"),
                                      dir.file("test.txt"), TokenizerKind::chars, 1),
                         doctest::Contains("cannot read"), std::runtime_error);
}

TEST_CASE("malformed UTF-8 is rejected with an offset") {
    CHECK_THROWS_WITH_AS(tokenize_chars(std::string("ab\xff") + "c"), doctest::Contains("offset"),
                         std::runtime_error);
}

TEST_CASE("generated text is deterministic and line-structured") {
    const std::string a = generate_text(11, 20000);
    const std::string b = generate_text(11, 20000);
    CHECK(a == b);
    CHECK(a.size() >= 20000);
    CHECK(a.find('\n') != std::string::npos);
    CHECK(generate_text(12, 20000) != a);
}

TEST_CASE("unknown subcommands and flags exit with code 2") {
    CHECK(run_cli({"frobnicate"}).exit_code == 2);
    CHECK(run_cli({"eval", "--no-such-flag"}).exit_code == 2);
    CHECK(run_cli({}).exit_code == 2);
}

TEST_CASE("verify-gumbel emits the documented CSV") {
    TempDir dir;
    const std::string out = dir.file("prop1.csv");
    const CapturedRun r = run_cli({"verify-gumbel", "--alpha", "0", "--tau", "0.1", "--epsilon",
                                   "0.05", "--n", "20000", "--seed", "7", "--out", out});
    CHECK(r.exit_code == 0);
    std::ifstream in(out);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header ==
          "alpha,tau,epsilon,n,empirical_upper,exact_upper,empirical_lower,exact_lower,p,slack,"
          "holds");
    CHECK(row.find("0.4269") != std::string::npos);
    CHECK(row.back() == '1');
}

TEST_CASE("end-to-end: train, eval, compress, gate-stats, trace are wired together") {
    TempDir dir;
    make_tiny_corpus(dir);
    const std::string model_path = dir.file("m.g2lm");

    const CapturedRun train = run_cli(
        {"train", "--data", dir.path.string(), "--gate-mode", "gumbel", "--tau", "0.9",
         "--clip-norm", "2.0", "--seed", "1", "--hidden", "12", "--embed", "12", "--layers", "2",
         "--epochs", "1", "--window", "16", "--batch", "4", "--quiet", "--out", model_path,
         "--log", dir.file("log.csv")});
    CHECK(train.exit_code == 0);
    CHECK(train.out.find("split,ppl") != std::string::npos);
    REQUIRE(fs::exists(model_path));

    const LoadedCheckpoint ckpt = load_checkpoint_file(model_path);
    CHECK(ckpt.model.config.gate_mode.kind == GateMode::Kind::gumbel_gate);
    CHECK(ckpt.model.config.hidden_dim == 12);

    std::ifstream log(dir.file("log.csv"));
    std::string log_header;
    std::getline(log, log_header);
    CHECK(log_header == "step,train_loss,val_ppl,grad_norm_preclip,wallclock_s");

    const CapturedRun eval =
        run_cli({"eval", "--model", model_path, "--data", dir.path.string(), "--split", "test"});
    CHECK(eval.exit_code == 0);
    CHECK(eval.out.find("split,ppl") == 0);

    const CapturedRun hard = run_cli({"eval", "--model", model_path, "--data", dir.path.string(),
                                      "--split", "test", "--hard-gates"});
    CHECK(hard.exit_code == 0);

    const CapturedRun comp = run_cli(
        {"compress", "--model", model_path, "--kind", "roundclip", "--r", "0.2", "--c", "0.4",
         "--data", dir.path.string(), "--out", dir.file("compressed.g2lm"), "--report",
         dir.file("report.csv")});
    CHECK(comp.exit_code == 0);
    std::ifstream report(dir.file("report.csv"));
    std::string rep_header, rep_row;
    std::getline(report, rep_header);
    std::getline(report, rep_row);
    CHECK(rep_header == "kind,params,ppl_before,ppl_after,delta");
    CHECK(rep_row.rfind("roundclip,", 0) == 0);
    CHECK(fs::exists(dir.file("compressed.g2lm")));

    const CapturedRun stats =
        run_cli({"gate-stats", "--model", model_path, "--data", dir.path.string(), "--layer", "0",
                 "--out-prefix", dir.file("gates")});
    CHECK(stats.exit_code == 0);
    CHECK(stats.out.find("gate,saturation_low,saturation_high,total") == 0);
    CHECK(fs::exists(dir.file("gates_input.csv")));
    CHECK(fs::exists(dir.file("gates_forget.csv")));
    std::ifstream hist(dir.file("gates_input.csv"));
    std::string hist_header;
    std::getline(hist, hist_header);
    CHECK(hist_header == "bin_lo,bin_hi,count");

    const CapturedRun trace = run_cli(
        {"trace", "--model", model_path, "--sentence", "The quiet river waited.", "--layer", "0"});
    CHECK(trace.exit_code == 0);
    CHECK(trace.out.rfind("token,avg_input,avg_forget\n", 0) == 0);

    // Checkpoint is self-contained: eval on a bare text file reuses its vocab.
    const CapturedRun text_eval =
        run_cli({"eval", "--model", model_path, "--text", dir.file("test.txt")});
    CHECK(text_eval.exit_code == 0);
}

TEST_CASE("same-seed train runs write identical checkpoints") {
    TempDir dir;
    make_tiny_corpus(dir, 9, 4000);
    auto train_once = [&](const std::string& out) {
        return run_cli({"train", "--data", dir.path.string(), "--gate-mode", "gumbel", "--seed",
                        "5", "--hidden", "8", "--embed", "8", "--layers", "1", "--epochs", "1",
                        "--window", "8", "--batch", "4", "--quiet", "--out", dir.file(out)});
    };
    CHECK(train_once("a.g2lm").exit_code == 0);
    CHECK(train_once("b.g2lm").exit_code == 0);
    std::ifstream fa(dir.file("a.g2lm"), std::ios::binary);
    std::ifstream fb(dir.file("b.g2lm"), std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
    CHECK(!ba.empty());
}

TEST_CASE("gradcheck subcommand reports success") {
    const CapturedRun r = run_cli({"gradcheck", "--mode", "standard"});
    CHECK(r.exit_code == 0);
    CHECK(r.out.rfind("mode,tied,block,max_rel_err\n", 0) == 0);
}
