#pragma once

#include "g2lstm/cell.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace g2lstm {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_layers = 1;
    GateMode gate_mode;
    bool tie_embeddings = false;
    double dropout_p = 0.0;

    /// Throws std::invalid_argument on an inconsistent configuration
    /// (tied embeddings require embed_dim == hidden_dim, etc.).
    void validate() const;
};

/// Stacked LSTM language model. When embeddings are tied, out_w is a mirror
/// of the embedding matrix kept in sync after every parameter update; the
/// embedding is the real parameter.
struct Model {
    Matrix embedding;  // vocab x embed
    std::vector<LayerParams> layers;
    Matrix out_w;  // vocab x hidden
    Vector out_b;  // vocab
    ModelConfig config;

    /// True parameter count (the tied mirror is not counted twice).
    std::size_t param_count() const;
    void sync_tied_output();
    const Matrix& projection() const { return config.tie_embeddings ? embedding : out_w; }
};

Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Gradient (or optimizer-moment) storage shaped like a Model.
struct ModelGrads {
    Matrix embedding;
    std::vector<LayerParams> layers;
    Matrix out_w;
    Vector out_b;
};

ModelGrads zero_grads(const ModelConfig& config);

/// Visits every tensor in canonical (checkpoint) order:
/// embedding; per layer w_xi,w_hi,b_i,w_xf,w_hf,b_f,w_xo,w_ho,b_o,w_xg,w_hg,b_g;
/// out_w; out_b. fn(name, flat double storage).
template <typename ModelLike, typename Fn>
void for_each_tensor(ModelLike&& m, Fn&& fn) {
    fn("embedding", m.embedding.flat());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& lay = m.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        fn(p + "w_xi", lay.w_xi.flat());
        fn(p + "w_hi", lay.w_hi.flat());
        fn(p + "b_i", lay.b_i);
        fn(p + "w_xf", lay.w_xf.flat());
        fn(p + "w_hf", lay.w_hf.flat());
        fn(p + "b_f", lay.b_f);
        fn(p + "w_xo", lay.w_xo.flat());
        fn(p + "w_ho", lay.w_ho.flat());
        fn(p + "b_o", lay.b_o);
        fn(p + "w_xg", lay.w_xg.flat());
        fn(p + "w_hg", lay.w_hg.flat());
        fn(p + "b_g", lay.b_g);
    }
    fn("out_w", m.out_w.flat());
    fn("out_b", m.out_b);
}

/// Tokens reshaped into batch_size contiguous streams (trailing remainder
/// dropped), the standard language-model batching.
struct BatchStream {
    std::size_t batch_size = 0;
    std::size_t steps = 0;
    std::vector<std::int32_t> ids;  // [b * steps + t]

    static BatchStream from_tokens(const std::vector<std::int32_t>& tokens,
                                   std::size_t batch_size);
    std::int32_t at(std::size_t b, std::size_t t) const { return ids[b * steps + t]; }
};

/// One BPTT window: len input positions and their shifted targets,
/// time-major layout [t * batch + b].
struct WindowBatch {
    std::size_t batch = 0;
    std::size_t len = 0;
    std::vector<std::int32_t> inputs;
    std::vector<std::int32_t> targets;
};

/// Slices [start, start+max_len) inputs with targets shifted by one.
/// Needs at least two tokens from start; throws otherwise.
WindowBatch make_window(const BatchStream& stream, std::size_t start, std::size_t max_len);

/// Per-layer recurrent state, hidden x batch.
struct LstmState {
    std::vector<Matrix> h, c;
};

LstmState zero_state(const ModelConfig& config, std::size_t batch);

/// Everything forward_sequence computed for one layer, column block t holding
/// timestep t (width = batch).
struct LayerSeqCache {
    Matrix x_all;      // input_dim x len*batch, the layer's actual (post-dropout) input
    Matrix hprev_all;  // hidden x len*batch
    Matrix h_all;
    Matrix cprev_all;
    Matrix c_all;
    Matrix i_all, f_all, o_all, g_all;
    Matrix noise_i_all, noise_f_all;  // empty outside gumbel training
    Matrix out_dropout_mask;          // hidden x batch; empty when unused
};

struct SequenceCaches {
    std::vector<LayerSeqCache> layers;
    Matrix probs;  // vocab x len*batch softmax probabilities
    WindowBatch win;
    bool training = false;
};

struct ForwardResult {
    double loss = 0.0;  // mean token cross-entropy over len*batch positions
    LstmState final_state;
    SequenceCaches caches;
};

/// Batched truncated-BPTT forward. noise_root seeds the per-(layer, timestep,
/// gate, batch-element) noise streams and the per-window dropout masks, so a
/// repeated call with identical arguments is bit-identical.
ForwardResult forward_sequence(const Model& model, const WindowBatch& win,
                               const LstmState& init_state, bool training,
                               RngState noise_root = RngState(0));

/// Exact gradients of the forward loss w.r.t. every parameter.
ModelGrads backward_sequence(const Model& model, const ForwardResult& fwd);

/// exp(mean cross-entropy) over the stream, evaluation mode, deterministic.
/// Throws std::invalid_argument on an empty/too-short stream.
double perplexity_eval(const Model& model, const std::vector<std::int32_t>& tokens,
                       std::size_t batch, std::size_t window);

/// In-place column-wise softmax with max subtraction.
void softmax_columns(Matrix& logits);

}  // namespace g2lstm
