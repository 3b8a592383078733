#include "g2lstm/cell.hpp"

#include "g2lstm/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace g2lstm {

std::string GateMode::name() const {
    switch (kind) {
        case Kind::standard: return "standard";
        case Kind::sharpened_sigmoid: return "sharpened";
        case Kind::gumbel_gate: return "gumbel";
    }
    return "?";
}

GateMode parse_gate_mode(const std::string& name, double tau) {
    if (name == "standard") return GateMode::standard();
    if (name == "sharpened") return GateMode::sharpened(tau);
    if (name == "gumbel") return GateMode::gumbel(tau);
    throw std::invalid_argument("unknown gate mode '" + name +
                                "' (expected standard|sharpened|gumbel)");
}

LayerParams init_layer_params(std::size_t input_dim, std::size_t hidden_dim, RngState& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    auto init_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.flat()) v = (2.0 * rng.uniform() - 1.0) * scale;
        return m;
    };
    LayerParams p;
    p.w_xi = init_matrix(hidden_dim, input_dim);
    p.w_hi = init_matrix(hidden_dim, hidden_dim);
    p.w_xf = init_matrix(hidden_dim, input_dim);
    p.w_hf = init_matrix(hidden_dim, hidden_dim);
    p.w_xo = init_matrix(hidden_dim, input_dim);
    p.w_ho = init_matrix(hidden_dim, hidden_dim);
    p.w_xg = init_matrix(hidden_dim, input_dim);
    p.w_hg = init_matrix(hidden_dim, hidden_dim);
    p.b_i = Vector(hidden_dim, 0.0);
    p.b_f = Vector(hidden_dim, 1.0);  // open forget gates at start
    p.b_o = Vector(hidden_dim, 0.0);
    p.b_g = Vector(hidden_dim, 0.0);
    return p;
}

namespace {

void check_len(const Vector& v, std::size_t expected, const char* name) {
    if (v.size() != expected) {
        throw std::invalid_argument(std::string("step: ") + name + " has length " +
                                    std::to_string(v.size()) + ", expected " +
                                    std::to_string(expected));
    }
}

Vector preactivation(const Matrix& wx, const Matrix& wh, const Vector& b, const Vector& x,
                     const Vector& h_prev) {
    Vector p = matvec(wx, x);
    const Vector ph = matvec(wh, h_prev);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += ph[j] + b[j];
    return p;
}

}  // namespace

StepResult step_forward(const LayerParams& params, const GateMode& mode, const Vector& x_t,
                        const Vector& h_prev, const Vector& c_prev, RngState* rng, bool training) {
    const std::size_t in = params.input_dim();
    const std::size_t hid = params.hidden_dim();
    check_len(x_t, in, "x_t");
    check_len(h_prev, hid, "h_prev");
    check_len(c_prev, hid, "c_prev");

    const bool sample = mode.samples_noise(training);
    if (sample && rng == nullptr) {
        throw std::invalid_argument("step_forward: gumbel training mode needs an rng");
    }

    StepCache cache;
    cache.x_t = x_t;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.preact_i = preactivation(params.w_xi, params.w_hi, params.b_i, x_t, h_prev);
    cache.preact_f = preactivation(params.w_xf, params.w_hf, params.b_f, x_t, h_prev);
    cache.preact_o = preactivation(params.w_xo, params.w_ho, params.b_o, x_t, h_prev);
    cache.preact_g = preactivation(params.w_xg, params.w_hg, params.b_g, x_t, h_prev);

    cache.noise_i = Vector(hid, 0.0);
    cache.noise_f = Vector(hid, 0.0);
    if (sample) {
        for (std::size_t j = 0; j < hid; ++j) cache.noise_i[j] = rng->logistic();
        for (std::size_t j = 0; j < hid; ++j) cache.noise_f[j] = rng->logistic();
    }

    const double tau = mode.gate_temperature();
    const bool hard = mode.hard_eval && mode.kind == GateMode::Kind::gumbel_gate && !training;
    cache.i_t.resize(hid);
    cache.f_t.resize(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        double i = concrete_gate(cache.preact_i[j], cache.noise_i[j], tau);
        double f = concrete_gate(cache.preact_f[j], cache.noise_f[j], tau);
        if (hard) {
            i = i >= 0.5 ? 1.0 : 0.0;
            f = f >= 0.5 ? 1.0 : 0.0;
        }
        cache.i_t[j] = i;
        cache.f_t[j] = f;
    }
    cache.o_t = sigmoid(cache.preact_o);
    cache.g_t = tanh_vec(cache.preact_g);

    cache.c_t.resize(hid);
    cache.h_t.resize(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        cache.c_t[j] = cache.f_t[j] * c_prev[j] + cache.i_t[j] * cache.g_t[j];
        cache.h_t[j] = cache.o_t[j] * std::tanh(cache.c_t[j]);
    }

    StepResult out;
    out.h_t = cache.h_t;
    out.c_t = cache.c_t;
    out.cache = std::move(cache);
    return out;
}

LayerGrads step_backward(const LayerParams& params, const GateMode& mode, const StepCache& cache,
                         const Vector& d_h, const Vector& d_c) {
    const std::size_t hid = params.hidden_dim();
    check_len(d_h, hid, "d_h");
    check_len(d_c, hid, "d_c");
    check_len(cache.h_prev, hid, "cache.h_prev");
    check_len(cache.x_t, params.input_dim(), "cache.x_t");

    const double tau = mode.gate_temperature();
    Vector d_pre_i(hid), d_pre_f(hid), d_pre_o(hid), d_pre_g(hid);
    LayerGrads g;
    g.d_c_prev.resize(hid);

    for (std::size_t j = 0; j < hid; ++j) {
        const double tc = std::tanh(cache.c_t[j]);
        const double d_o = d_h[j] * tc;
        const double d_ct = d_c[j] + d_h[j] * cache.o_t[j] * (1.0 - tc * tc);
        const double d_f = d_ct * cache.c_prev[j];
        const double d_i = d_ct * cache.g_t[j];
        const double d_g = d_ct * cache.i_t[j];
        g.d_c_prev[j] = d_ct * cache.f_t[j];

        const double i = cache.i_t[j], f = cache.f_t[j], o = cache.o_t[j], gg = cache.g_t[j];
        d_pre_i[j] = d_i * i * (1.0 - i) / tau;
        d_pre_f[j] = d_f * f * (1.0 - f) / tau;
        d_pre_o[j] = d_o * o * (1.0 - o);
        d_pre_g[j] = d_g * (1.0 - gg * gg);
    }

    g.w_xi = outer(d_pre_i, cache.x_t);
    g.w_hi = outer(d_pre_i, cache.h_prev);
    g.w_xf = outer(d_pre_f, cache.x_t);
    g.w_hf = outer(d_pre_f, cache.h_prev);
    g.w_xo = outer(d_pre_o, cache.x_t);
    g.w_ho = outer(d_pre_o, cache.h_prev);
    g.w_xg = outer(d_pre_g, cache.x_t);
    g.w_hg = outer(d_pre_g, cache.h_prev);
    g.b_i = d_pre_i;
    g.b_f = d_pre_f;
    g.b_o = d_pre_o;
    g.b_g = d_pre_g;

    g.d_x = matvec_t(params.w_xi, d_pre_i);
    g.d_h_prev = matvec_t(params.w_hi, d_pre_i);
    const Vector xf = matvec_t(params.w_xf, d_pre_f);
    const Vector hf = matvec_t(params.w_hf, d_pre_f);
    const Vector xo = matvec_t(params.w_xo, d_pre_o);
    const Vector ho = matvec_t(params.w_ho, d_pre_o);
    const Vector xg = matvec_t(params.w_xg, d_pre_g);
    const Vector hg = matvec_t(params.w_hg, d_pre_g);
    for (std::size_t j = 0; j < g.d_x.size(); ++j) g.d_x[j] += xf[j] + xo[j] + xg[j];
    for (std::size_t j = 0; j < hid; ++j) g.d_h_prev[j] += hf[j] + ho[j] + hg[j];

    // The mode only enters through tau; noise is already frozen in the cache.
    (void)mode;
    return g;
}

}  // namespace g2lstm
