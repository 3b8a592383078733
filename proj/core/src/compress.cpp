#include "g2lstm/compress.hpp"

#include "g2lstm/svd.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace g2lstm {

std::string spec_kind(const CompressionSpec& spec) {
    if (std::holds_alternative<RoundSpec>(spec)) return "round";
    if (std::holds_alternative<RoundClipSpec>(spec)) return "roundclip";
    return "lowrank";
}

std::string spec_params(const CompressionSpec& spec) {
    std::ostringstream ss;
    ss.precision(10);
    if (const auto* r = std::get_if<RoundSpec>(&spec)) {
        ss << "r=" << r->r;
    } else if (const auto* rc = std::get_if<RoundClipSpec>(&spec)) {
        ss << "r=" << rc->r << " c=" << rc->c;
    } else {
        ss << "k=" << std::get<LowRankSpec>(spec).k;
    }
    return ss.str();
}

double round_r(double x, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("round_r: r must be > 0");
    // std::round ties away from zero, matching the stated convention.
    return std::round(x / r) * r;
}

double clip_c(double x, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("clip_c: c must be > 0");
    return std::clamp(x, -c, c);
}

namespace {

// Gate blocks the compression operators touch, per layer.
template <typename Fn>
void for_each_quant_target(LayerParams& layer, Fn&& fn) {
    fn(layer.w_xi.flat());
    fn(layer.w_hi.flat());
    fn(layer.b_i);
    fn(layer.w_xf.flat());
    fn(layer.w_hf.flat());
    fn(layer.b_f);
}

template <typename Fn>
void for_each_lowrank_target(LayerParams& layer, Fn&& fn) {
    fn(layer.w_xi);
    fn(layer.w_hi);
    fn(layer.w_xf);
    fn(layer.w_hf);
}

}  // namespace

Model apply_round_clip(const Model& model, double r, double c, bool with_clip) {
    if (!(r > 0.0)) throw std::invalid_argument("apply_round_clip: r must be > 0");
    if (with_clip) {
        if (!(c > 0.0)) throw std::invalid_argument("apply_round_clip: c must be > 0");
        const double ratio = c / r;
        if (std::abs(ratio - std::round(ratio)) > 1e-9) {
            throw std::invalid_argument("apply_round_clip: c=" + std::to_string(c) +
                                        " is not a multiple of r=" + std::to_string(r));
        }
    }
    Model out = model;
    for (LayerParams& layer : out.layers) {
        for_each_quant_target(layer, [&](std::vector<double>& data) {
            for (double& x : data) {
                x = round_r(x, r);
                if (with_clip) x = clip_c(x, c);
            }
        });
    }
    out.sync_tied_output();
    return out;
}

Model apply_low_rank(const Model& model, std::size_t k) {
    if (k < 1) throw std::out_of_range("apply_low_rank: k must be >= 1");
    Model out = model;
    for (LayerParams& layer : out.layers) {
        for_each_lowrank_target(layer, [&](Matrix& w) {
            const std::size_t full = std::min(w.rows(), w.cols());
            if (k > full) {
                throw std::out_of_range("apply_low_rank: k=" + std::to_string(k) +
                                        " exceeds min dimension of a " + w.shape_str() +
                                        " gate matrix");
            }
            w = truncate_rank(svd(w), k);
        });
    }
    out.sync_tied_output();
    return out;
}

Model apply_compression(const Model& model, const CompressionSpec& spec) {
    if (const auto* r = std::get_if<RoundSpec>(&spec)) {
        return apply_round_clip(model, r->r, 0.0, /*with_clip=*/false);
    }
    if (const auto* rc = std::get_if<RoundClipSpec>(&spec)) {
        return apply_round_clip(model, rc->r, rc->c, /*with_clip=*/true);
    }
    return apply_low_rank(model, std::get<LowRankSpec>(spec).k);
}

CompressionReport compress_and_eval(const Model& model, const CompressionSpec& spec,
                                    const std::vector<std::int32_t>& eval_stream,
                                    std::size_t eval_batch, std::size_t eval_window) {
    CompressionReport rep;
    rep.spec = spec;
    rep.ppl_before = perplexity_eval(model, eval_stream, eval_batch, eval_window);
    Model compressed = apply_compression(model, spec);
    rep.ppl_after = perplexity_eval(compressed, eval_stream, eval_batch, eval_window);
    rep.delta = rep.ppl_after - rep.ppl_before;

    if (!std::holds_alternative<LowRankSpec>(spec)) {
        std::set<double> support;
        for (LayerParams& layer : compressed.layers) {
            for_each_quant_target(layer, [&](std::vector<double>& data) {
                for (double x : data) support.insert(x);
            });
        }
        rep.support_values = std::vector<double>(support.begin(), support.end());
    } else {
        const auto& w = model.layers.front().w_xi;
        rep.rank_before = std::min(w.rows(), w.cols());
        rep.rank_after = std::get<LowRankSpec>(spec).k;
    }
    return rep;
}

std::vector<std::pair<CompressionReport, CompressionReport>> compare_under_compression(
    const Model& model_a, const Model& model_b, const std::vector<CompressionSpec>& specs,
    const std::vector<std::int32_t>& eval_stream, std::size_t eval_batch,
    std::size_t eval_window) {
    if (model_a.config.vocab_size != model_b.config.vocab_size) {
        throw std::invalid_argument("compare_under_compression: vocabulary mismatch (" +
                                    std::to_string(model_a.config.vocab_size) + " vs " +
                                    std::to_string(model_b.config.vocab_size) + ")");
    }
    std::vector<std::pair<CompressionReport, CompressionReport>> out;
    out.reserve(specs.size());
    for (const CompressionSpec& spec : specs) {
        out.emplace_back(compress_and_eval(model_a, spec, eval_stream, eval_batch, eval_window),
                         compress_and_eval(model_b, spec, eval_stream, eval_batch, eval_window));
    }
    return out;
}

std::string compression_report_csv_header() {
    return "kind,params,ppl_before,ppl_after,delta";
}

std::string compression_report_csv_row(const CompressionReport& report) {
    std::ostringstream ss;
    ss.precision(10);
    ss << spec_kind(report.spec) << ',' << spec_params(report.spec) << ',' << report.ppl_before
       << ',' << report.ppl_after << ',' << report.delta;
    return ss.str();
}

}  // namespace g2lstm
