#include "g2lstm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace g2lstm {

void GateHistogram::add(double value) {
    std::size_t bin;
    if (value >= 1.0) {
        bin = kBins - 1;
    } else if (value <= 0.0) {
        bin = 0;
    } else {
        bin = static_cast<std::size_t>(value * static_cast<double>(kBins));
    }
    ++counts[bin];
    ++total;
    if (value <= 0.1) ++low_;
    if (value >= 0.9) ++high_;
}

void GateHistogram::finalize() {
    if (total == 0) return;
    saturation_low = static_cast<double>(low_) / static_cast<double>(total);
    saturation_high = static_cast<double>(high_) / static_cast<double>(total);
}

namespace {

// Runs the batched eval forward over equal-length streams, handing each
// window's caches to the visitor.
template <typename Fn>
void walk_gates(const Model& model, const std::vector<const std::vector<std::int32_t>*>& streams,
                std::size_t layer_index, Fn&& visit) {
    const std::size_t B = streams.size();
    const std::size_t n = streams.front()->size();
    constexpr std::size_t kChunk = 128;

    LstmState state = zero_state(model.config, B);
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t len = std::min(kChunk, n - start);
        WindowBatch win;
        win.batch = B;
        win.len = len;
        win.inputs.resize(len * B);
        win.targets.resize(len * B);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t b = 0; b < B; ++b) {
                const std::int32_t id = (*streams[b])[start + t];
                win.inputs[t * B + b] = id;
                // Targets are irrelevant for gate statistics; shift within the
                // stream and repeat the final token.
                win.targets[t * B + b] =
                    start + t + 1 < n ? (*streams[b])[start + t + 1] : id;
            }
        }
        ForwardResult r = forward_sequence(model, win, state, /*training=*/false);
        state = std::move(r.final_state);
        visit(r.caches.layers[layer_index], len, B);
    }
}

}  // namespace

GateHistogramPair collect_gate_histograms(const Model& model,
                                          const std::vector<std::int32_t>& sample,
                                          std::size_t layer_index) {
    if (sample.empty()) throw std::invalid_argument("collect_gate_histograms: empty sample");
    if (layer_index >= model.config.num_layers) {
        throw std::out_of_range("collect_gate_histograms: layer " + std::to_string(layer_index) +
                                " out of range");
    }

    // Chop the sample into equal streams so the walk is batched.
    const std::size_t B = std::clamp<std::size_t>(sample.size() / 64, 1, 64);
    const std::size_t n = sample.size() / B;
    std::vector<std::vector<std::int32_t>> streams(B);
    for (std::size_t b = 0; b < B; ++b)
        streams[b].assign(sample.begin() + b * n, sample.begin() + (b + 1) * n);
    std::vector<const std::vector<std::int32_t>*> ptrs;
    for (const auto& s : streams) ptrs.push_back(&s);

    GateHistogramPair out;
    walk_gates(model, ptrs, layer_index,
               [&](const LayerSeqCache& cache, std::size_t, std::size_t) {
                   for (double v : cache.i_all.flat()) out.input.add(v);
                   for (double v : cache.f_all.flat()) out.forget.add(v);
               });
    out.input.finalize();
    out.forget.finalize();
    return out;
}

std::string gate_histogram_csv(const GateHistogram& hist) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "bin_lo,bin_hi,count\n";
    const double width = 1.0 / static_cast<double>(GateHistogram::kBins);
    for (std::size_t b = 0; b < GateHistogram::kBins; ++b) {
        ss << b * width << ',' << (b + 1) * width << ',' << hist.counts[b] << '\n';
    }
    return ss.str();
}

TimestepGateTrace trace_sentence(const Model& model, const Vocabulary& vocab,
                                 const std::vector<std::string>& tokens,
                                 std::size_t layer_index) {
    TimestepGateTrace trace;
    if (tokens.empty()) return trace;
    if (layer_index >= model.config.num_layers) {
        throw std::out_of_range("trace_sentence: layer " + std::to_string(layer_index) +
                                " out of range");
    }
    std::vector<std::int32_t> ids;
    for (const std::string& tok : tokens) ids.push_back(vocab.lookup(tok));

    trace.tokens = tokens;
    std::vector<const std::vector<std::int32_t>*> one = {&ids};
    const std::size_t H = model.config.hidden_dim;
    walk_gates(model, one, layer_index,
               [&](const LayerSeqCache& cache, std::size_t len, std::size_t) {
                   for (std::size_t t = 0; t < len; ++t) {
                       double si = 0.0, sf = 0.0;
                       for (std::size_t j = 0; j < H; ++j) {
                           si += cache.i_all(j, t);
                           sf += cache.f_all(j, t);
                       }
                       trace.avg_input_gate.push_back(si / static_cast<double>(H));
                       trace.avg_forget_gate.push_back(sf / static_cast<double>(H));
                   }
               });
    return trace;
}

std::string trace_csv(const TimestepGateTrace& trace) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "token,avg_input,avg_forget\n";
    for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
        std::string tok = trace.tokens[i];
        // CSV-quote tokens containing separators.
        if (tok.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : tok) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            quoted += '"';
            tok = quoted;
        }
        ss << tok << ',' << trace.avg_input_gate[i] << ',' << trace.avg_forget_gate[i] << '\n';
    }
    return ss.str();
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

LstmState grad_check_init_state(const ModelConfig& config, std::size_t batch,
                                std::uint64_t noise_seed) {
    LstmState s = zero_state(config, batch);
    RngState rng = RngState(noise_seed).derive({4});
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        for (double& v : s.h[l].flat()) v = rng.uniform() - 0.5;
        for (double& v : s.c[l].flat()) v = 2.0 * rng.uniform() - 1.0;
    }
    return s;
}

namespace {

using ld = long double;

ld ld_sigmoid(ld x) {
    if (x >= 0.0L) return 1.0L / (1.0L + std::exp(-x));
    const ld e = std::exp(x);
    return e / (1.0L + e);
}

// Scalar long-double re-implementation of the forward loss, consuming the
// same noise and dropout streams as the batched double-precision forward.
ld reference_loss_ld(const Model& model, const WindowBatch& win, const LstmState& init,
                     bool training, const RngState& root) {
    const ModelConfig& cfg = model.config;
    const std::size_t B = win.batch, L = win.len, N = L * B;
    const std::size_t H = cfg.hidden_dim, E = cfg.embed_dim, V = cfg.vocab_size;
    const bool sample = cfg.gate_mode.samples_noise(training);
    const ld tau = cfg.gate_mode.gate_temperature();

    std::vector<ld> x(E * N);
    for (std::size_t n = 0; n < N; ++n) {
        const double* row =
            model.embedding.data() + static_cast<std::size_t>(win.inputs[n]) * E;
        for (std::size_t j = 0; j < E; ++j) x[j * N + n] = row[j];
    }

    std::size_t in_dim = E;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const LayerParams& p = model.layers[l];
        std::vector<ld> h(H * B), c(H * B);
        for (std::size_t i = 0; i < H * B; ++i) {
            h[i] = init.h[l].flat()[i];
            c[i] = init.c[l].flat()[i];
        }
        std::vector<ld> x_next(H * N);

        for (std::size_t t = 0; t < L; ++t) {
            std::vector<ld> noise_i(H * B, 0.0L), noise_f(H * B, 0.0L);
            if (sample) {
                for (std::size_t b = 0; b < B; ++b) {
                    RngState si = root.derive({1, l, t, 0, b});
                    for (std::size_t j = 0; j < H; ++j) noise_i[j * B + b] = si.logistic();
                }
                for (std::size_t b = 0; b < B; ++b) {
                    RngState sf = root.derive({1, l, t, 1, b});
                    for (std::size_t j = 0; j < H; ++j) noise_f[j * B + b] = sf.logistic();
                }
            }
            for (std::size_t b = 0; b < B; ++b) {
                std::vector<ld> h_new(H), c_new(H);
                for (std::size_t j = 0; j < H; ++j) {
                    ld pi = p.b_i[j], pf = p.b_f[j], po = p.b_o[j], pg = p.b_g[j];
                    for (std::size_t k = 0; k < in_dim; ++k) {
                        const ld xv = x[k * N + t * B + b];
                        pi += static_cast<ld>(p.w_xi(j, k)) * xv;
                        pf += static_cast<ld>(p.w_xf(j, k)) * xv;
                        po += static_cast<ld>(p.w_xo(j, k)) * xv;
                        pg += static_cast<ld>(p.w_xg(j, k)) * xv;
                    }
                    for (std::size_t k = 0; k < H; ++k) {
                        const ld hv = h[k * B + b];
                        pi += static_cast<ld>(p.w_hi(j, k)) * hv;
                        pf += static_cast<ld>(p.w_hf(j, k)) * hv;
                        po += static_cast<ld>(p.w_ho(j, k)) * hv;
                        pg += static_cast<ld>(p.w_hg(j, k)) * hv;
                    }
                    const ld gi = ld_sigmoid((pi + noise_i[j * B + b]) / tau);
                    const ld gf = ld_sigmoid((pf + noise_f[j * B + b]) / tau);
                    const ld go = ld_sigmoid(po);
                    const ld gg = std::tanh(pg);
                    c_new[j] = gf * c[j * B + b] + gi * gg;
                    h_new[j] = go * std::tanh(c_new[j]);
                }
                for (std::size_t j = 0; j < H; ++j) {
                    h[j * B + b] = h_new[j];
                    c[j * B + b] = c_new[j];
                    x_next[j * N + t * B + b] = h_new[j];
                }
            }
        }

        if (l + 1 < cfg.num_layers && training && cfg.dropout_p > 0.0) {
            RngState mr = root.derive({2, l});
            const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
            for (std::size_t j = 0; j < H; ++j) {
                for (std::size_t b = 0; b < B; ++b) {
                    const double mask = mr.uniform() >= cfg.dropout_p ? keep_scale : 0.0;
                    for (std::size_t t = 0; t < L; ++t) x_next[j * N + t * B + b] *= mask;
                }
            }
        }
        x = std::move(x_next);
        in_dim = H;
    }

    const Matrix& proj = model.projection();
    ld sum = 0.0L;
    for (std::size_t n = 0; n < N; ++n) {
        std::vector<ld> logits(V);
        ld m = -HUGE_VALL;
        for (std::size_t v = 0; v < V; ++v) {
            ld z = model.out_b[v];
            for (std::size_t k = 0; k < H; ++k)
                z += static_cast<ld>(proj(v, k)) * x[k * N + n];
            logits[v] = z;
            m = std::max(m, z);
        }
        ld zsum = 0.0L;
        for (std::size_t v = 0; v < V; ++v) zsum += std::exp(logits[v] - m);
        const ld lse = m + std::log(zsum);
        sum += lse - logits[static_cast<std::size_t>(win.targets[n])];
    }
    return sum / static_cast<ld>(N);
}

}  // namespace

double reference_forward_loss(const Model& model, const WindowBatch& win,
                              const LstmState& init_state, bool training, RngState noise_root) {
    return static_cast<double>(reference_loss_ld(model, win, init_state, training, noise_root));
}

ModelGrads finite_difference_grads(const Model& model, const WindowBatch& win,
                                   std::uint64_t noise_seed, double h) {
    Model work = model;
    const LstmState init = grad_check_init_state(model.config, win.batch, noise_seed);
    const RngState root(noise_seed);

    ModelGrads numeric = zero_grads(model.config);
    std::vector<std::vector<double>*> params, grads;
    for_each_tensor(work, [&](const std::string&, std::vector<double>& d) { params.push_back(&d); });
    for_each_tensor(numeric,
                    [&](const std::string&, std::vector<double>& d) { grads.push_back(&d); });

    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t]->size(); ++i) {
            const double saved = (*params[t])[i];
            const double up_at = saved + h;
            const double down_at = saved - h;
            (*params[t])[i] = up_at;
            const ld up = reference_loss_ld(work, win, init, /*training=*/true, root);
            (*params[t])[i] = down_at;
            const ld down = reference_loss_ld(work, win, init, /*training=*/true, root);
            (*params[t])[i] = saved;
            // Exact step width: up_at/down_at are the representable points.
            (*grads[t])[i] =
                static_cast<double>((up - down) / (static_cast<ld>(up_at) - down_at));
        }
    }
    return numeric;
}

GradCheckReport compare_grads(const ModelGrads& analytic, const ModelGrads& numeric, double h,
                              double tol) {
    GradCheckReport rep;
    rep.h = h;
    rep.tol = tol;

    std::vector<std::pair<std::string, const std::vector<double>*>> as, ns;
    for_each_tensor(analytic, [&](const std::string& name, const std::vector<double>& d) {
        as.emplace_back(name, &d);
    });
    for_each_tensor(numeric, [&](const std::string& name, const std::vector<double>& d) {
        ns.emplace_back(name, &d);
    });

    for (std::size_t t = 0; t < as.size(); ++t) {
        GradCheckBlock block;
        block.name = as[t].first;
        for (std::size_t i = 0; i < as[t].second->size(); ++i) {
            const double a = (*as[t].second)[i];
            const double n = (*ns[t].second)[i];
            const double rel = relative_error(a, n);
            if (rel > block.max_rel_err) {
                block.max_rel_err = rel;
                block.worst_analytic = a;
                block.worst_numeric = n;
            }
        }
        rep.max_rel_err = std::max(rep.max_rel_err, block.max_rel_err);
        rep.blocks.push_back(std::move(block));
    }
    rep.passed = rep.max_rel_err < tol;
    return rep;
}

GradCheckReport grad_check(const Model& model, const WindowBatch& win, std::uint64_t noise_seed,
                           double h, double tol) {
    const LstmState init = grad_check_init_state(model.config, win.batch, noise_seed);
    const RngState root(noise_seed);
    const ForwardResult fwd = forward_sequence(model, win, init, /*training=*/true, root);
    const ModelGrads analytic = backward_sequence(model, fwd);
    const ModelGrads numeric = finite_difference_grads(model, win, noise_seed, h);
    return compare_grads(analytic, numeric, h, tol);
}

std::string grad_check_csv(const GradCheckReport& report) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "block,max_rel_err\n";
    for (const auto& b : report.blocks) ss << b.name << ',' << b.max_rel_err << '\n';
    ss << "all," << report.max_rel_err << '\n';
    return ss.str();
}

}  // namespace g2lstm
