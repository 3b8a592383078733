#include "g2lstm/network.hpp"

#include "g2lstm/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace g2lstm {

void ModelConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("ModelConfig: vocab_size must be >= 2");
    if (embed_dim == 0 || hidden_dim == 0)
        throw std::invalid_argument("ModelConfig: embed_dim and hidden_dim must be positive");
    if (num_layers < 1) throw std::invalid_argument("ModelConfig: num_layers must be >= 1");
    if (tie_embeddings && embed_dim != hidden_dim)
        throw std::invalid_argument("ModelConfig: tied embeddings require embed_dim == hidden_dim");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw std::invalid_argument("ModelConfig: dropout_p must lie in [0,1)");
    if (gate_mode.kind != GateMode::Kind::standard && !(gate_mode.tau > 0.0))
        throw std::invalid_argument("ModelConfig: gate temperature must be > 0");
}

std::size_t Model::param_count() const {
    std::size_t n = embedding.size() + out_b.size();
    if (!config.tie_embeddings) n += out_w.size();
    for (const auto& l : layers) {
        n += l.w_xi.size() + l.w_hi.size() + l.w_xf.size() + l.w_hf.size();
        n += l.w_xo.size() + l.w_ho.size() + l.w_xg.size() + l.w_hg.size();
        n += l.b_i.size() + l.b_f.size() + l.b_o.size() + l.b_g.size();
    }
    return n;
}

void Model::sync_tied_output() {
    if (config.tie_embeddings) out_w = embedding;
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    RngState rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));

    Model m;
    m.config = config;
    m.embedding = Matrix(config.vocab_size, config.embed_dim);
    for (double& v : m.embedding.flat()) v = (2.0 * rng.uniform() - 1.0) * scale;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const std::size_t in = l == 0 ? config.embed_dim : config.hidden_dim;
        m.layers.push_back(init_layer_params(in, config.hidden_dim, rng));
    }
    if (config.tie_embeddings) {
        m.out_w = m.embedding;
    } else {
        m.out_w = Matrix(config.vocab_size, config.hidden_dim);
        for (double& v : m.out_w.flat()) v = (2.0 * rng.uniform() - 1.0) * scale;
    }
    m.out_b = Vector(config.vocab_size, 0.0);
    return m;
}

ModelGrads zero_grads(const ModelConfig& config) {
    ModelGrads g;
    g.embedding = Matrix(config.vocab_size, config.embed_dim);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const std::size_t in = l == 0 ? config.embed_dim : config.hidden_dim;
        LayerParams p;
        p.w_xi = Matrix(config.hidden_dim, in);
        p.w_hi = Matrix(config.hidden_dim, config.hidden_dim);
        p.w_xf = Matrix(config.hidden_dim, in);
        p.w_hf = Matrix(config.hidden_dim, config.hidden_dim);
        p.w_xo = Matrix(config.hidden_dim, in);
        p.w_ho = Matrix(config.hidden_dim, config.hidden_dim);
        p.w_xg = Matrix(config.hidden_dim, in);
        p.w_hg = Matrix(config.hidden_dim, config.hidden_dim);
        p.b_i = Vector(config.hidden_dim, 0.0);
        p.b_f = Vector(config.hidden_dim, 0.0);
        p.b_o = Vector(config.hidden_dim, 0.0);
        p.b_g = Vector(config.hidden_dim, 0.0);
        g.layers.push_back(std::move(p));
    }
    g.out_w = Matrix(config.vocab_size, config.hidden_dim);
    g.out_b = Vector(config.vocab_size, 0.0);
    return g;
}

BatchStream BatchStream::from_tokens(const std::vector<std::int32_t>& tokens,
                                     std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("BatchStream: batch_size must be >= 1");
    BatchStream s;
    s.batch_size = batch_size;
    s.steps = tokens.size() / batch_size;
    if (s.steps < 2) {
        throw std::invalid_argument("BatchStream: " + std::to_string(tokens.size()) +
                                    " tokens cannot fill " + std::to_string(batch_size) +
                                    " streams of length >= 2");
    }
    s.ids.resize(batch_size * s.steps);
    for (std::size_t b = 0; b < batch_size; ++b)
        for (std::size_t t = 0; t < s.steps; ++t) s.ids[b * s.steps + t] = tokens[b * s.steps + t];
    return s;
}

WindowBatch make_window(const BatchStream& stream, std::size_t start, std::size_t max_len) {
    if (max_len == 0) throw std::invalid_argument("make_window: window length must be >= 1");
    if (start + 1 >= stream.steps) {
        throw std::invalid_argument("make_window: need at least 2 tokens from position " +
                                    std::to_string(start));
    }
    WindowBatch w;
    w.batch = stream.batch_size;
    w.len = std::min(max_len, stream.steps - 1 - start);
    w.inputs.resize(w.len * w.batch);
    w.targets.resize(w.len * w.batch);
    for (std::size_t t = 0; t < w.len; ++t) {
        for (std::size_t b = 0; b < w.batch; ++b) {
            w.inputs[t * w.batch + b] = stream.at(b, start + t);
            w.targets[t * w.batch + b] = stream.at(b, start + t + 1);
        }
    }
    return w;
}

LstmState zero_state(const ModelConfig& config, std::size_t batch) {
    LstmState s;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        s.h.emplace_back(config.hidden_dim, batch);
        s.c.emplace_back(config.hidden_dim, batch);
    }
    return s;
}

namespace {

// Gate rows are stacked [i; f; o; g] in the fused matrices.
struct FusedLayer {
    Matrix w_x, w_h;
    Vector b;
};

FusedLayer fuse_layer(const LayerParams& p) {
    const std::size_t hid = p.hidden_dim();
    const std::size_t in = p.input_dim();
    FusedLayer f;
    f.w_x = Matrix(4 * hid, in);
    f.w_h = Matrix(4 * hid, hid);
    f.b = Vector(4 * hid);
    const Matrix* wx[4] = {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xg};
    const Matrix* wh[4] = {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hg};
    const Vector* bb[4] = {&p.b_i, &p.b_f, &p.b_o, &p.b_g};
    for (int gate = 0; gate < 4; ++gate) {
        std::copy(wx[gate]->flat().begin(), wx[gate]->flat().end(),
                  f.w_x.flat().begin() + gate * hid * in);
        std::copy(wh[gate]->flat().begin(), wh[gate]->flat().end(),
                  f.w_h.flat().begin() + gate * hid * hid);
        std::copy(bb[gate]->begin(), bb[gate]->end(), f.b.begin() + gate * hid);
    }
    return f;
}

void check_token_ids(const WindowBatch& win, std::size_t vocab) {
    for (std::size_t n = 0; n < win.inputs.size(); ++n) {
        if (win.inputs[n] < 0 || static_cast<std::size_t>(win.inputs[n]) >= vocab ||
            win.targets[n] < 0 || static_cast<std::size_t>(win.targets[n]) >= vocab) {
            throw std::out_of_range("forward_sequence: token id out of vocabulary (size " +
                                    std::to_string(vocab) + ") at position " + std::to_string(n));
        }
    }
}

void fill_logistic_noise(Matrix& slab, std::size_t t, std::size_t batch, std::size_t hid,
                         const RngState& root, std::size_t layer, std::uint64_t gate) {
    const std::size_t n_cols = slab.cols();
    for (std::size_t b = 0; b < batch; ++b) {
        RngState st = root.derive({1, layer, t, gate, b});
        for (std::size_t j = 0; j < hid; ++j) slab.flat()[j * n_cols + t * batch + b] = st.logistic();
    }
}

}  // namespace

ForwardResult forward_sequence(const Model& model, const WindowBatch& win,
                               const LstmState& init_state, bool training, RngState noise_root) {
    const ModelConfig& cfg = model.config;
    const std::size_t B = win.batch;
    const std::size_t L = win.len;
    const std::size_t N = L * B;
    const std::size_t H = cfg.hidden_dim;
    if (B == 0 || L == 0) throw std::invalid_argument("forward_sequence: empty window");
    if (init_state.h.size() != cfg.num_layers)
        throw std::invalid_argument("forward_sequence: state has wrong number of layers");
    check_token_ids(win, cfg.vocab_size);

    const bool sample = cfg.gate_mode.samples_noise(training);
    const bool hard = cfg.gate_mode.hard_eval &&
                      cfg.gate_mode.kind == GateMode::Kind::gumbel_gate && !training;
    const double tau = cfg.gate_mode.gate_temperature();

    ForwardResult out;
    out.caches.win = win;
    out.caches.training = training;
    out.final_state = init_state;

    // Layer 0 input: gathered embedding columns.
    Matrix x(cfg.embed_dim, N);
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = model.embedding.data() +
                            static_cast<std::size_t>(win.inputs[n]) * cfg.embed_dim;
        for (std::size_t j = 0; j < cfg.embed_dim; ++j) x.flat()[j * N + n] = row[j];
    }

    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const FusedLayer fused = fuse_layer(model.layers[l]);
        LayerSeqCache cache;
        cache.x_all = std::move(x);
        cache.hprev_all = Matrix(H, N);
        cache.h_all = Matrix(H, N);
        cache.cprev_all = Matrix(H, N);
        cache.c_all = Matrix(H, N);
        cache.i_all = Matrix(H, N);
        cache.f_all = Matrix(H, N);
        cache.o_all = Matrix(H, N);
        cache.g_all = Matrix(H, N);
        if (sample) {
            cache.noise_i_all = Matrix(H, N);
            cache.noise_f_all = Matrix(H, N);
        }

        const Matrix pre_x = matmul(fused.w_x, cache.x_all);  // 4H x N
        Matrix h = init_state.h[l];
        Matrix c = init_state.c[l];
        Matrix pre(4 * H, B);

        for (std::size_t t = 0; t < L; ++t) {
            if (sample) {
                fill_logistic_noise(cache.noise_i_all, t, B, H, noise_root, l, 0);
                fill_logistic_noise(cache.noise_f_all, t, B, H, noise_root, l, 1);
            }
            const Matrix rec = matmul(fused.w_h, h);
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double br = fused.b[r];
                const double* px = pre_x.data() + r * N + t * B;
                const double* pr = rec.data() + r * B;
                double* pd = pre.data() + r * B;
                for (std::size_t b = 0; b < B; ++b) pd[b] = px[b] + pr[b] + br;
            }

            for (std::size_t j = 0; j < H; ++j) {
                const std::size_t off = j * N + t * B;
                const double* pi = pre.data() + j * B;
                const double* pf = pre.data() + (H + j) * B;
                const double* po = pre.data() + (2 * H + j) * B;
                const double* pg = pre.data() + (3 * H + j) * B;
                const double* ni = sample ? cache.noise_i_all.data() + off : nullptr;
                const double* nf = sample ? cache.noise_f_all.data() + off : nullptr;
                double* iv = cache.i_all.data() + off;
                double* fv = cache.f_all.data() + off;
                double* ov = cache.o_all.data() + off;
                double* gv = cache.g_all.data() + off;
                double* cp = cache.cprev_all.data() + off;
                double* hp = cache.hprev_all.data() + off;
                double* cn = cache.c_all.data() + off;
                double* hn = cache.h_all.data() + off;
                double* hrow = h.data() + j * B;
                double* crow = c.data() + j * B;
                for (std::size_t b = 0; b < B; ++b) {
                    double gi = concrete_gate(pi[b], sample ? ni[b] : 0.0, tau);
                    double gf = concrete_gate(pf[b], sample ? nf[b] : 0.0, tau);
                    if (hard) {
                        gi = gi >= 0.5 ? 1.0 : 0.0;
                        gf = gf >= 0.5 ? 1.0 : 0.0;
                    }
                    const double go = sigmoid(po[b]);
                    const double gg = std::tanh(pg[b]);
                    const double c_new = gf * crow[b] + gi * gg;
                    const double h_new = go * std::tanh(c_new);
                    iv[b] = gi;
                    fv[b] = gf;
                    ov[b] = go;
                    gv[b] = gg;
                    cp[b] = crow[b];
                    hp[b] = hrow[b];
                    cn[b] = c_new;
                    hn[b] = h_new;
                    crow[b] = c_new;
                    hrow[b] = h_new;
                }
            }
        }
        out.final_state.h[l] = h;
        out.final_state.c[l] = c;

        // Input for the next layer (inter-layer dropout only, frozen per window).
        if (l + 1 < cfg.num_layers) {
            x = cache.h_all;
            if (training && cfg.dropout_p > 0.0) {
                cache.out_dropout_mask = Matrix(H, B);
                RngState mr = noise_root.derive({2, l});
                const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
                for (double& v : cache.out_dropout_mask.flat())
                    v = mr.uniform() >= cfg.dropout_p ? keep_scale : 0.0;
                for (std::size_t j = 0; j < H; ++j) {
                    const double* mrow = cache.out_dropout_mask.data() + j * B;
                    double* xrow = x.data() + j * N;
                    for (std::size_t n = 0; n < N; ++n) xrow[n] *= mrow[n % B];
                }
            }
        }
        out.caches.layers.push_back(std::move(cache));
    }

    // Output projection and column-wise log-softmax cross entropy.
    const Matrix& top = out.caches.layers.back().h_all;
    Matrix logits = matmul(model.projection(), top);
    const std::size_t V = cfg.vocab_size;
    for (std::size_t v = 0; v < V; ++v) {
        const double bv = model.out_b[v];
        double* row = logits.data() + v * N;
        for (std::size_t n = 0; n < N; ++n) row[n] += bv;
    }

    out.caches.probs = Matrix(V, N);
    double sum = 0.0, comp = 0.0;  // Kahan
    for (std::size_t n = 0; n < N; ++n) {
        double m = logits.flat()[n];
        for (std::size_t v = 1; v < V; ++v) m = std::max(m, logits.flat()[v * N + n]);
        double z = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
            const double e = std::exp(logits.flat()[v * N + n] - m);
            out.caches.probs.flat()[v * N + n] = e;
            z += e;
        }
        const double inv_z = 1.0 / z;
        for (std::size_t v = 0; v < V; ++v) out.caches.probs.flat()[v * N + n] *= inv_z;
        const double lse = m + std::log(z);
        const double ce = lse - logits.flat()[static_cast<std::size_t>(win.targets[n]) * N + n];
        const double y = ce - comp;
        const double t2 = sum + y;
        comp = (t2 - sum) - y;
        sum = t2;
    }
    out.loss = sum / static_cast<double>(N);
    return out;
}

ModelGrads backward_sequence(const Model& model, const ForwardResult& fwd) {
    const ModelConfig& cfg = model.config;
    const SequenceCaches& caches = fwd.caches;
    const WindowBatch& win = caches.win;
    const std::size_t B = win.batch;
    const std::size_t L = win.len;
    const std::size_t N = L * B;
    const std::size_t H = cfg.hidden_dim;
    const std::size_t V = cfg.vocab_size;
    if (caches.layers.size() != cfg.num_layers)
        throw std::invalid_argument("backward_sequence: cache does not match model");
    const double tau = cfg.gate_mode.gate_temperature();

    ModelGrads grads = zero_grads(cfg);

    // d loss / d logits = (softmax - onehot) / N.
    Matrix d_logits = caches.probs;
    const double inv_n = 1.0 / static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n)
        d_logits.flat()[static_cast<std::size_t>(win.targets[n]) * N + n] -= 1.0;
    for (double& v : d_logits.flat()) v *= inv_n;

    const Matrix& top = caches.layers.back().h_all;
    Matrix d_proj = matmul_nt(d_logits, top);  // V x H
    for (std::size_t v = 0; v < V; ++v) {
        double s = 0.0;
        const double* row = d_logits.data() + v * N;
        for (std::size_t n = 0; n < N; ++n) s += row[n];
        grads.out_b[v] = s;
    }
    Matrix d_h_all = matmul_tn(model.projection(), d_logits);  // H x N

    for (std::size_t li = cfg.num_layers; li-- > 0;) {
        const LayerSeqCache& cache = caches.layers[li];
        const FusedLayer fused = fuse_layer(model.layers[li]);

        // Dropout applied to this layer's output on the way up.
        if (!cache.out_dropout_mask.empty()) {
            for (std::size_t j = 0; j < H; ++j) {
                const double* mrow = cache.out_dropout_mask.data() + j * B;
                double* drow = d_h_all.data() + j * N;
                for (std::size_t n = 0; n < N; ++n) drow[n] *= mrow[n % B];
            }
        }

        Matrix d_pre_all(4 * H, N);
        Matrix d_pre_t(4 * H, B);
        Matrix carry_dh(H, B);
        Matrix carry_dc(H, B);

        for (std::size_t t = L; t-- > 0;) {
            for (std::size_t j = 0; j < H; ++j) {
                const std::size_t off = j * N + t * B;
                const double* iv = cache.i_all.data() + off;
                const double* fv = cache.f_all.data() + off;
                const double* ov = cache.o_all.data() + off;
                const double* gv = cache.g_all.data() + off;
                const double* cp = cache.cprev_all.data() + off;
                const double* cn = cache.c_all.data() + off;
                const double* dh_in = d_h_all.data() + off;
                double* cdh = carry_dh.data() + j * B;
                double* cdc = carry_dc.data() + j * B;
                double* dpi = d_pre_t.data() + j * B;
                double* dpf = d_pre_t.data() + (H + j) * B;
                double* dpo = d_pre_t.data() + (2 * H + j) * B;
                double* dpg = d_pre_t.data() + (3 * H + j) * B;
                for (std::size_t b = 0; b < B; ++b) {
                    const double d_h = dh_in[b] + cdh[b];
                    const double tc = std::tanh(cn[b]);
                    const double d_o = d_h * tc;
                    const double d_ct = cdc[b] + d_h * ov[b] * (1.0 - tc * tc);
                    const double d_f = d_ct * cp[b];
                    const double d_i = d_ct * gv[b];
                    const double d_g = d_ct * iv[b];
                    dpi[b] = d_i * iv[b] * (1.0 - iv[b]) / tau;
                    dpf[b] = d_f * fv[b] * (1.0 - fv[b]) / tau;
                    dpo[b] = d_o * ov[b] * (1.0 - ov[b]);
                    dpg[b] = d_g * (1.0 - gv[b] * gv[b]);
                    cdc[b] = d_ct * fv[b];
                }
            }
            carry_dh = matmul_tn(fused.w_h, d_pre_t);
            for (std::size_t r = 0; r < 4 * H; ++r)
                std::copy(d_pre_t.data() + r * B, d_pre_t.data() + (r + 1) * B,
                          d_pre_all.data() + r * N + t * B);
        }

        const Matrix dw_x = matmul_nt(d_pre_all, cache.x_all);      // 4H x in
        const Matrix dw_h = matmul_nt(d_pre_all, cache.hprev_all);  // 4H x H
        LayerParams& lg = grads.layers[li];
        const std::size_t in_dim = cache.x_all.rows();
        Matrix* gx[4] = {&lg.w_xi, &lg.w_xf, &lg.w_xo, &lg.w_xg};
        Matrix* gh[4] = {&lg.w_hi, &lg.w_hf, &lg.w_ho, &lg.w_hg};
        Vector* gb[4] = {&lg.b_i, &lg.b_f, &lg.b_o, &lg.b_g};
        for (int gate = 0; gate < 4; ++gate) {
            std::copy(dw_x.flat().begin() + gate * H * in_dim,
                      dw_x.flat().begin() + (gate + 1) * H * in_dim, gx[gate]->flat().begin());
            std::copy(dw_h.flat().begin() + gate * H * H,
                      dw_h.flat().begin() + (gate + 1) * H * H, gh[gate]->flat().begin());
            for (std::size_t j = 0; j < H; ++j) {
                double s = 0.0;
                const double* row = d_pre_all.data() + (gate * H + j) * N;
                for (std::size_t n = 0; n < N; ++n) s += row[n];
                (*gb[gate])[j] = s;
            }
        }

        Matrix d_x_all = matmul_tn(fused.w_x, d_pre_all);  // in x N
        if (li == 0) {
            for (std::size_t n = 0; n < N; ++n) {
                double* erow = grads.embedding.data() +
                               static_cast<std::size_t>(win.inputs[n]) * cfg.embed_dim;
                for (std::size_t j = 0; j < cfg.embed_dim; ++j) erow[j] += d_x_all.flat()[j * N + n];
            }
        } else {
            d_h_all = std::move(d_x_all);
        }
    }

    if (cfg.tie_embeddings) {
        // Projection gradient folds into the embedding; the mirror is not a parameter.
        for (std::size_t i = 0; i < grads.embedding.size(); ++i)
            grads.embedding.flat()[i] += d_proj.flat()[i];
    } else {
        grads.out_w = std::move(d_proj);
    }
    return grads;
}

double perplexity_eval(const Model& model, const std::vector<std::int32_t>& tokens,
                       std::size_t batch, std::size_t window) {
    if (tokens.size() < 2)
        throw std::invalid_argument("perplexity_eval: stream is empty or too short");
    const std::size_t batch_eff = std::max<std::size_t>(1, std::min(batch, tokens.size() / 2));
    const BatchStream stream = BatchStream::from_tokens(tokens, batch_eff);
    LstmState state = zero_state(model.config, batch_eff);

    double sum = 0.0, comp = 0.0;
    std::size_t positions = 0;
    for (std::size_t start = 0; start + 1 < stream.steps; start += window) {
        WindowBatch win = make_window(stream, start, window);
        ForwardResult r = forward_sequence(model, win, state, /*training=*/false);
        state = std::move(r.final_state);
        const double chunk = r.loss * static_cast<double>(win.len * win.batch);
        const double y = chunk - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        positions += win.len * win.batch;
    }
    return std::exp(sum / static_cast<double>(positions));
}

void softmax_columns(Matrix& logits) {
    const std::size_t rows = logits.rows();
    const std::size_t cols = logits.cols();
    for (std::size_t n = 0; n < cols; ++n) {
        double m = logits.flat()[n];
        for (std::size_t v = 1; v < rows; ++v) m = std::max(m, logits.flat()[v * cols + n]);
        double z = 0.0;
        for (std::size_t v = 0; v < rows; ++v) {
            double& cell = logits.flat()[v * cols + n];
            cell = std::exp(cell - m);
            z += cell;
        }
        for (std::size_t v = 0; v < rows; ++v) logits.flat()[v * cols + n] /= z;
    }
}

}  // namespace g2lstm
