// Writes a deterministic synthetic corpus as train/valid/test splits, for
// desk-scale experiments without external data.

#include "g2lstm/corpus.hpp"
#include "g2lstm/textgen.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"generate a synthetic text corpus (train.txt/valid.txt/test.txt)"};
    std::string out_dir = ".";
    std::uint64_t seed = 2024;
    std::size_t total_bytes = 1000000;
    double valid_frac = 0.05, test_frac = 0.05;
    app.add_option("--out", out_dir, "output directory (must exist)");
    app.add_option("--seed", seed);
    app.add_option("--bytes", total_bytes, "approximate total corpus size");
    app.add_option("--valid-frac", valid_frac);
    app.add_option("--test-frac", test_frac);
    CLI11_PARSE(app, argc, argv);

    try {
        const std::string text = g2lstm::generate_text(seed, total_bytes);
        const std::size_t n = text.size();
        const auto n_valid = static_cast<std::size_t>(static_cast<double>(n) * valid_frac);
        const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * test_frac);
        const std::size_t n_train = n - n_valid - n_test;
        g2lstm::write_text_file(out_dir + "/train.txt", text.substr(0, n_train));
        g2lstm::write_text_file(out_dir + "/valid.txt", text.substr(n_train, n_valid));
        g2lstm::write_text_file(out_dir + "/test.txt", text.substr(n_train + n_valid));
        std::cout << "wrote " << n_train << "/" << n_valid << "/" << n_test
                  << " bytes to " << out_dir << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
