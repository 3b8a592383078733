#pragma once

#include "g2lstm/network.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace g2lstm {

/// Post-training compression of the input/forget gate parameters
/// {w_xi, w_hi, b_i, w_xf, w_hf, b_f} per layer (biases excluded for LowRank).
struct RoundSpec {
    double r;
};
struct RoundClipSpec {
    double r, c;
};
struct LowRankSpec {
    std::size_t k;
};
using CompressionSpec = std::variant<RoundSpec, RoundClipSpec, LowRankSpec>;

std::string spec_kind(const CompressionSpec& spec);
std::string spec_params(const CompressionSpec& spec);

/// round(x/r)*r with ties rounded half away from zero. Requires r > 0.
double round_r(double x, double r);

/// clamp(x, -c, c). Requires c > 0.
double clip_c(double x, double c);

/// Quantizes the gate blocks; with_clip additionally clamps to [-c, c] and
/// requires c to be a positive multiple of r. Non-target parameters are
/// untouched bit-exactly.
Model apply_round_clip(const Model& model, double r, double c, bool with_clip);

/// Replaces w_xi, w_hi, w_xf, w_hf of every layer by their rank-k truncation.
/// Requires 1 <= k <= min dimension of each target matrix.
Model apply_low_rank(const Model& model, std::size_t k);

Model apply_compression(const Model& model, const CompressionSpec& spec);

struct CompressionReport {
    CompressionSpec spec;
    double ppl_before = 0.0;
    double ppl_after = 0.0;
    double delta = 0.0;  // ppl_after - ppl_before
    std::optional<std::vector<double>> support_values;  // distinct quantized values
    std::optional<std::size_t> rank_before, rank_after;
};

CompressionReport compress_and_eval(const Model& model, const CompressionSpec& spec,
                                    const std::vector<std::int32_t>& eval_stream,
                                    std::size_t eval_batch, std::size_t eval_window);

/// Paired harness: for each spec, reports (ppl_before, ppl_after, delta) for
/// both models on the same stream. Requires matching vocab sizes.
std::vector<std::pair<CompressionReport, CompressionReport>> compare_under_compression(
    const Model& model_a, const Model& model_b, const std::vector<CompressionSpec>& specs,
    const std::vector<std::int32_t>& eval_stream, std::size_t eval_batch,
    std::size_t eval_window);

std::string compression_report_csv_header();
std::string compression_report_csv_row(const CompressionReport& report);

}  // namespace g2lstm
