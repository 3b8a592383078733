#include "g2lstm/cli.hpp"

#include "g2lstm/analysis.hpp"
#include "g2lstm/checkpoint.hpp"
#include "g2lstm/compress.hpp"
#include "g2lstm/corpus.hpp"
#include "g2lstm/sampling.hpp"
#include "g2lstm/train.hpp"

#include <CLI11.hpp>

#include <array>
#include <bit>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace g2lstm::cli {

namespace {

struct DataArgs {
    std::string data_dir;
    std::string text_file;
    std::string tokenizer = "char";
    std::string split = "test";
    std::size_t min_freq = 1;
};

void add_data_flags(CLI::App& cmd, DataArgs& args, bool with_split) {
    cmd.add_option("--data", args.data_dir, "directory with train.txt/valid.txt/test.txt");
    cmd.add_option("--text", args.text_file, "single text file to evaluate instead of --data");
    cmd.add_option("--tokenizer", args.tokenizer, "char|word")->check(CLI::IsMember({"char", "word"}));
    if (with_split) {
        cmd.add_option("--split", args.split, "which split of --data to use")
            ->check(CLI::IsMember({"train", "valid", "test"}));
    }
    cmd.add_option("--min-freq", args.min_freq, "word mode: min train frequency kept");
}

/// Token ids of the requested eval stream under the checkpoint vocabulary.
std::vector<std::int32_t> load_eval_stream(const DataArgs& args, const Vocabulary& vocab) {
    const TokenizerKind kind = parse_tokenizer_kind(args.tokenizer);
    std::string text;
    if (!args.text_file.empty()) {
        text = read_text_file(args.text_file);
    } else if (!args.data_dir.empty()) {
        text = read_text_file(args.data_dir + "/" + args.split + ".txt");
    } else {
        throw std::runtime_error("need --data or --text");
    }
    const std::vector<std::string> tokens =
        kind == TokenizerKind::chars ? tokenize_chars(text) : tokenize_words(text);
    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.lookup(t));
    return ids;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot write: " + path);
    return file;
}

int cmd_train(const DataArgs& data, const std::string& gate_mode_name,
              std::optional<double> tau_opt, std::size_t layers, std::size_t hidden,
              std::size_t embed, int tie_flag, double dropout, const std::string& optimizer,
              std::optional<double> lr_opt, double beta1, double beta2, double eps,
              double decay_factor, std::size_t patience, double clip_norm, std::size_t epochs,
              std::uint64_t seed, std::size_t window, std::size_t batch, std::size_t eval_every,
              const std::string& out_path, const std::string& log_path, bool quiet) {
    if (data.data_dir.empty()) throw std::runtime_error("train: --data is required");
    const TokenizerKind kind = parse_tokenizer_kind(data.tokenizer);
    const Corpus corpus = build_corpus(data.data_dir + "/train.txt", data.data_dir + "/valid.txt",
                                       data.data_dir + "/test.txt", kind, data.min_freq);

    const double tau = tau_opt ? *tau_opt : (gate_mode_name == "sharpened" ? 0.2 : 0.9);
    ModelConfig mc;
    mc.vocab_size = corpus.vocab.size();
    mc.embed_dim = embed;
    mc.hidden_dim = hidden;
    mc.num_layers = layers;
    mc.gate_mode = parse_gate_mode(gate_mode_name, tau);
    mc.tie_embeddings = tie_flag < 0 ? kind == TokenizerKind::words : tie_flag > 0;
    mc.dropout_p = dropout;
    if (mc.tie_embeddings && embed != hidden) {
        throw std::runtime_error("train: tied embeddings need --embed == --hidden");
    }

    TrainConfig tc;
    if (optimizer == "sgd") {
        tc.optimizer = SgdConfig{lr_opt ? *lr_opt : 1.0, decay_factor, patience};
    } else {
        tc.optimizer = AdamConfig{lr_opt ? *lr_opt : 1e-3, beta1, beta2, eps};
    }
    tc.clip_norm = clip_norm;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.window = window;
    tc.batch = batch;
    tc.eval_every = eval_every;

    Model model = init_model(mc, seed);
    TrainResult result =
        train_loop(std::move(model), corpus.train, corpus.valid, tc, quiet ? nullptr : &std::cout);
    save_checkpoint_file(out_path, result.model, corpus.vocab);

    if (!log_path.empty()) {
        std::ofstream log(log_path);
        if (!log) throw std::runtime_error("cannot write: " + log_path);
        log << train_log_csv_header() << '\n';
        for (const auto& row : result.log) log << train_log_csv_row(row) << '\n';
    }

    const double test_ppl = perplexity_eval(result.model, corpus.test, batch, window);
    std::cout << "split,ppl\n";
    std::cout << "valid," << result.best_val_ppl << '\n';
    std::cout << "test," << test_ppl << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const DataArgs& data, std::size_t batch,
             std::size_t window, bool hard_gates, const std::string& out_path) {
    LoadedCheckpoint ckpt = load_checkpoint_file(model_path);
    if (hard_gates) ckpt.model.config.gate_mode.hard_eval = true;
    const std::vector<std::int32_t> stream = load_eval_stream(data, ckpt.vocab);
    const double ppl = perplexity_eval(ckpt.model, stream, batch, window);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << "split,ppl\n";
    out << (data.text_file.empty() ? data.split : data.text_file) << ',' << std::setprecision(10)
        << ppl << '\n';
    return 0;
}

int cmd_compress(const std::string& model_path, const std::string& model_b_path,
                 const std::string& kind, double r, double c, std::size_t k, const DataArgs& data,
                 std::size_t batch, std::size_t window, const std::string& out_path,
                 const std::string& report_path) {
    CompressionSpec spec = RoundSpec{r};
    if (kind == "roundclip") {
        spec = RoundClipSpec{r, c};
    } else if (kind == "lowrank") {
        spec = LowRankSpec{k};
    } else if (kind != "round") {
        throw std::runtime_error("compress: unknown --kind " + kind);
    }

    LoadedCheckpoint a = load_checkpoint_file(model_path);
    const std::vector<std::int32_t> stream = load_eval_stream(data, a.vocab);

    std::ofstream file;
    std::ostream& out = open_out(file, report_path);
    out << compression_report_csv_header() << '\n';
    if (model_b_path.empty()) {
        const CompressionReport rep = compress_and_eval(a.model, spec, stream, batch, window);
        out << compression_report_csv_row(rep) << '\n';
    } else {
        LoadedCheckpoint b = load_checkpoint_file(model_b_path);
        if (!(a.vocab == b.vocab)) throw std::runtime_error("compress: vocabulary mismatch");
        const auto pairs =
            compare_under_compression(a.model, b.model, {spec}, stream, batch, window);
        for (const auto& [ra, rb] : pairs) {
            out << compression_report_csv_row(ra) << '\n';
            out << compression_report_csv_row(rb) << '\n';
        }
    }

    if (!out_path.empty()) {
        save_checkpoint_file(out_path, apply_compression(a.model, spec), a.vocab);
    }
    return 0;
}

int cmd_gate_stats(const std::string& model_path, const DataArgs& data, std::size_t layer,
                   std::size_t max_tokens, const std::string& out_prefix) {
    const LoadedCheckpoint ckpt = load_checkpoint_file(model_path);
    std::vector<std::int32_t> stream = load_eval_stream(data, ckpt.vocab);
    if (max_tokens > 0 && stream.size() > max_tokens) stream.resize(max_tokens);
    const GateHistogramPair hists = collect_gate_histograms(ckpt.model, stream, layer);

    write_text_file(out_prefix + "_input.csv", gate_histogram_csv(hists.input));
    write_text_file(out_prefix + "_forget.csv", gate_histogram_csv(hists.forget));
    std::cout << "gate,saturation_low,saturation_high,total\n";
    std::cout << std::setprecision(10) << "input," << hists.input.saturation_low << ','
              << hists.input.saturation_high << ',' << hists.input.total << '\n';
    std::cout << "forget," << hists.forget.saturation_low << ',' << hists.forget.saturation_high
              << ',' << hists.forget.total << '\n';
    return 0;
}

int cmd_trace(const std::string& model_path, const std::string& sentence,
              const std::string& file_path, const std::string& tokenizer, std::size_t layer,
              const std::string& out_path) {
    const LoadedCheckpoint ckpt = load_checkpoint_file(model_path);
    std::string text = sentence;
    if (!file_path.empty()) text = read_text_file(file_path);
    if (text.empty()) throw std::runtime_error("trace: need --sentence or --file");
    const TokenizerKind kind = parse_tokenizer_kind(tokenizer);
    const std::vector<std::string> tokens =
        kind == TokenizerKind::chars ? tokenize_chars(text) : tokenize_words(text);
    const TimestepGateTrace trace = trace_sentence(ckpt.model, ckpt.vocab, tokens, layer);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << trace_csv(trace);
    return 0;
}

int cmd_verify_gumbel(bool grid, double alpha, double tau, double epsilon, std::uint64_t n,
                      std::uint64_t seed, const std::string& out_path) {
    std::vector<std::array<double, 3>> points;
    if (grid) {
        for (double a : {-2.0, -0.5, 0.0, 0.5, 2.0})
            for (double t : {0.1, 0.5, 0.9, 2.0})
                for (double e : {0.01, 0.05, 0.1}) points.push_back({a, t, e});
    } else {
        points.push_back({alpha, tau, epsilon});
    }

    RngState rng(seed);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << "alpha,tau,epsilon,n,empirical_upper,exact_upper,empirical_lower,exact_lower,p,slack,"
           "holds\n";
    bool all_hold = true;
    out << std::setprecision(10);
    for (const auto& [a, t, e] : points) {
        RngState point_rng = rng.derive({std::bit_cast<std::uint64_t>(a),
                                         std::bit_cast<std::uint64_t>(t),
                                         std::bit_cast<std::uint64_t>(e)});
        const Prop1Report rep = verify_prop1(a, t, e, n, point_rng);
        const bool holds = rep.upper_bound_holds && rep.lower_bound_holds;
        all_hold = all_hold && holds;
        out << rep.alpha << ',' << rep.tau << ',' << rep.epsilon << ',' << rep.n_samples << ','
            << rep.empirical_upper_tail << ',' << rep.exact_upper_tail << ','
            << rep.empirical_lower_tail << ',' << rep.exact_lower_tail << ',' << rep.bernoulli_p
            << ',' << rep.bound_slack << ',' << (holds ? 1 : 0) << '\n';
    }
    return all_hold ? 0 : 1;
}

int cmd_gradcheck(const std::string& mode, double h, double tol, std::uint64_t seed) {
    std::vector<std::string> modes;
    if (mode == "all") {
        modes = {"standard", "sharpened", "gumbel"};
    } else {
        modes = {mode};
    }

    std::cout << "mode,tied,block,max_rel_err\n";
    std::cout << std::setprecision(10);
    bool all_pass = true;
    for (const std::string& m : modes) {
        for (const bool tied : {false, true}) {
            ModelConfig mc;
            mc.vocab_size = 5;
            mc.embed_dim = tied ? 4 : 3;
            mc.hidden_dim = 4;
            mc.num_layers = 1;
            mc.gate_mode = parse_gate_mode(m, m == "sharpened" ? 0.2 : 0.9);
            mc.tie_embeddings = tied;
            const Model model = init_model(mc, seed);

            WindowBatch win;
            win.batch = 2;
            win.len = 3;
            win.inputs = {0, 1, 2, 3, 4, 0};
            win.targets = {1, 2, 3, 4, 0, 1};
            const GradCheckReport rep = grad_check(model, win, seed + 17, h, tol);
            all_pass = all_pass && rep.passed;
            for (const auto& block : rep.blocks) {
                std::cout << m << ',' << (tied ? 1 : 0) << ',' << block.name << ','
                          << block.max_rel_err << '\n';
            }
            std::cout << m << ',' << (tied ? 1 : 0) << ",all," << rep.max_rel_err << '\n';
        }
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"G2-LSTM: LSTM language models with binary-concrete input/forget gates"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a language model and write a checkpoint");
    DataArgs train_data;
    add_data_flags(*train, train_data, /*with_split=*/false);
    std::string gate_mode = "standard";
    std::optional<double> tau_opt;
    std::size_t layers = 2, hidden = 256, embed = 256;
    int tie_flag = -1;  // -1 = per-tokenizer default
    double dropout = 0.0;
    std::string optimizer = "adam";
    std::optional<double> lr_opt;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, decay_factor = 0.5;
    std::size_t patience = 2;
    double clip_norm = 2.0;
    std::size_t epochs = 1, window = 35, batch = 20, eval_every = 0;
    std::uint64_t seed = 1;
    std::string out_path = "model.g2lm", log_path;
    bool quiet = false;
    train->add_option("--gate-mode", gate_mode, "standard|sharpened|gumbel")
        ->check(CLI::IsMember({"standard", "sharpened", "gumbel"}));
    train->add_option("--tau", tau_opt, "gate temperature (default 0.9 gumbel, 0.2 sharpened)");
    train->add_option("--layers", layers);
    train->add_option("--hidden", hidden);
    train->add_option("--embed", embed);
    train->add_flag("--tie{1},--no-tie{0}", tie_flag,
                    "tie embedding and output projection (default: word mode only)");
    train->add_option("--dropout", dropout, "inter-layer dropout probability");
    train->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    train->add_option("--lr", lr_opt, "learning rate (default 1e-3 adam, 1.0 sgd)");
    train->add_option("--beta1", beta1);
    train->add_option("--beta2", beta2);
    train->add_option("--eps", eps);
    train->add_option("--decay-factor", decay_factor, "sgd plateau decay");
    train->add_option("--patience", patience, "sgd evals without improvement before decay");
    train->add_option("--clip-norm", clip_norm, "global gradient-norm cap");
    train->add_option("--epochs", epochs);
    train->add_option("--seed", seed);
    train->add_option("--window", window, "BPTT window length");
    train->add_option("--batch", batch);
    train->add_option("--eval-every", eval_every, "steps between validations (0 = per epoch)");
    train->add_option("--out", out_path, "checkpoint output path");
    train->add_option("--log", log_path, "training log CSV path");
    train->add_flag("--quiet", quiet);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "perplexity of a checkpoint on a text");
    DataArgs eval_data;
    std::string eval_model, eval_out;
    std::size_t eval_batch = 20, eval_window = 35;
    bool hard_gates = false;
    eval->add_option("--model", eval_model)->required();
    add_data_flags(*eval, eval_data, /*with_split=*/true);
    eval->add_option("--batch", eval_batch);
    eval->add_option("--window", eval_window);
    eval->add_flag("--hard-gates", hard_gates, "threshold gumbel gates at 1/2 (experimental)");
    eval->add_option("--out", eval_out, "output CSV (default stdout)");

    // ---- compress ----
    auto* compress = app.add_subcommand("compress", "quantize or low-rank a checkpoint");
    DataArgs comp_data;
    std::string comp_model, comp_model_b, comp_kind, comp_out, comp_report;
    double comp_r = 0.2, comp_c = 0.4;
    std::size_t comp_k = 1, comp_batch = 20, comp_window = 35;
    compress->add_option("--model", comp_model)->required();
    compress->add_option("--model-b", comp_model_b, "second model for a paired report");
    compress->add_option("--kind", comp_kind, "round|roundclip|lowrank")
        ->required()
        ->check(CLI::IsMember({"round", "roundclip", "lowrank"}));
    compress->add_option("--r", comp_r, "quantization step");
    compress->add_option("--c", comp_c, "clip bound");
    compress->add_option("--k", comp_k, "target rank");
    add_data_flags(*compress, comp_data, /*with_split=*/true);
    compress->add_option("--batch", comp_batch);
    compress->add_option("--window", comp_window);
    compress->add_option("--out", comp_out, "write the compressed checkpoint here");
    compress->add_option("--report", comp_report, "report CSV (default stdout)");

    // ---- gate-stats ----
    auto* stats = app.add_subcommand("gate-stats", "input/forget gate histograms");
    DataArgs stats_data;
    std::string stats_model, stats_prefix = "gate_stats";
    std::size_t stats_layer = 0, stats_max_tokens = 0;
    stats->add_option("--model", stats_model)->required();
    add_data_flags(*stats, stats_data, /*with_split=*/true);
    stats->add_option("--layer", stats_layer);
    stats->add_option("--max-tokens", stats_max_tokens, "cap on sampled tokens (0 = all)");
    stats->add_option("--out-prefix", stats_prefix, "writes <prefix>_input.csv, <prefix>_forget.csv");

    // ---- trace ----
    auto* trace = app.add_subcommand("trace", "per-token average gate values");
    std::string trace_model, trace_sent, trace_file, trace_tokenizer = "char", trace_out;
    std::size_t trace_layer = 0;
    trace->add_option("--model", trace_model)->required();
    trace->add_option("--sentence", trace_sent, "text to trace");
    trace->add_option("--file", trace_file, "file to trace instead of --sentence");
    trace->add_option("--tokenizer", trace_tokenizer)->check(CLI::IsMember({"char", "word"}));
    trace->add_option("--layer", trace_layer);
    trace->add_option("--out", trace_out, "output CSV (default stdout)");

    // ---- verify-gumbel ----
    auto* verify = app.add_subcommand("verify-gumbel", "tail bounds of the relaxed Bernoulli gate");
    bool verify_grid = false;
    double v_alpha = 0.0, v_tau = 0.9, v_eps = 0.05;
    std::uint64_t v_n = 1000000, v_seed = 7;
    std::string verify_out;
    verify->add_flag("--grid", verify_grid, "run the default (alpha, tau, epsilon) grid");
    verify->add_option("--alpha", v_alpha);
    verify->add_option("--tau", v_tau);
    verify->add_option("--epsilon", v_eps);
    verify->add_option("--n", v_n, "Monte-Carlo samples per point");
    verify->add_option("--seed", v_seed);
    verify->add_option("--out", verify_out, "output CSV (default stdout)");

    // ---- gradcheck ----
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_mode = "all";
    double gc_h = 1e-5, gc_tol = 1e-6;
    std::uint64_t gc_seed = 5;
    gradcheck->add_option("--mode", gc_mode)
        ->check(CLI::IsMember({"all", "standard", "sharpened", "gumbel"}));
    gradcheck->add_option("--step", gc_h, "finite-difference step");
    gradcheck->add_option("--tol", gc_tol, "max relative error allowed");
    gradcheck->add_option("--seed", gc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) {
            return cmd_train(train_data, gate_mode, tau_opt, layers, hidden, embed, tie_flag,
                             dropout, optimizer, lr_opt, beta1, beta2, eps, decay_factor, patience,
                             clip_norm, epochs, seed, window, batch, eval_every, out_path, log_path,
                             quiet);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_model, eval_data, eval_batch, eval_window, hard_gates, eval_out);
        }
        if (compress->parsed()) {
            return cmd_compress(comp_model, comp_model_b, comp_kind, comp_r, comp_c, comp_k,
                                comp_data, comp_batch, comp_window, comp_out, comp_report);
        }
        if (stats->parsed()) {
            return cmd_gate_stats(stats_model, stats_data, stats_layer, stats_max_tokens,
                                  stats_prefix);
        }
        if (trace->parsed()) {
            return cmd_trace(trace_model, trace_sent, trace_file, trace_tokenizer, trace_layer,
                             trace_out);
        }
        if (verify->parsed()) {
            return cmd_verify_gumbel(verify_grid, v_alpha, v_tau, v_eps, v_n, v_seed, verify_out);
        }
        if (gradcheck->parsed()) {
            return cmd_gradcheck(gc_mode, gc_h, gc_tol, gc_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.push_back("g2lstm");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace g2lstm::cli
