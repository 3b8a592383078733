#pragma once

#include "g2lstm/linalg.hpp"
#include "g2lstm/rng.hpp"

#include <cstdint>
#include <string>

namespace g2lstm {

/// Input/forget gate behavior. The output gate and the candidate are never
/// temperature-scaled in any mode.
struct GateMode {
    enum class Kind : std::uint32_t { standard = 0, sharpened_sigmoid = 1, gumbel_gate = 2 };

    Kind kind = Kind::standard;
    double tau = 1.0;
    // Experimental inference rule: threshold the deterministic gate at 1/2
    // instead of evaluating sigma(preact/tau). Off by default.
    bool hard_eval = false;

    static GateMode standard() { return {Kind::standard, 1.0, false}; }
    static GateMode sharpened(double tau) { return {Kind::sharpened_sigmoid, tau, false}; }
    static GateMode gumbel(double tau) { return {Kind::gumbel_gate, tau, false}; }

    /// Divisor applied to input/forget preactivations (1 in standard mode).
    double gate_temperature() const { return kind == Kind::standard ? 1.0 : tau; }
    bool samples_noise(bool training) const { return kind == Kind::gumbel_gate && training; }

    std::string name() const;
};

GateMode parse_gate_mode(const std::string& name, double tau);

/// Weights and biases of one layer: four input-to-hidden matrices, four
/// hidden-to-hidden matrices, four biases.
struct LayerParams {
    Matrix w_xi, w_hi;
    Matrix w_xf, w_hf;
    Matrix w_xo, w_ho;
    Matrix w_xg, w_hg;
    Vector b_i, b_f, b_o, b_g;

    std::size_t input_dim() const { return w_xi.cols(); }
    std::size_t hidden_dim() const { return w_xi.rows(); }
};

/// Weights uniform in [-1/sqrt(hidden), 1/sqrt(hidden)]; forget bias 1,
/// other biases 0.
LayerParams init_layer_params(std::size_t input_dim, std::size_t hidden_dim, RngState& rng);

/// Everything step_forward computed, kept so step_backward is exact and a
/// replay of the forward from the cache is bit-identical.
struct StepCache {
    Vector x_t, h_prev, c_prev;
    Vector preact_i, preact_f, preact_o, preact_g;
    Vector i_t, f_t, o_t, g_t;
    Vector c_t, h_t;
    Vector noise_i, noise_f;  // logistic noise; zero-filled outside gumbel training
};

struct StepResult {
    Vector h_t, c_t;
    StepCache cache;
};

/// One timestep. rng may be null except in gumbel training mode.
StepResult step_forward(const LayerParams& params, const GateMode& mode, const Vector& x_t,
                        const Vector& h_prev, const Vector& c_prev, RngState* rng, bool training);

struct LayerGrads {
    Matrix w_xi, w_hi;
    Matrix w_xf, w_hf;
    Matrix w_xo, w_ho;
    Matrix w_xg, w_hg;
    Vector b_i, b_f, b_o, b_g;
    Vector d_x, d_h_prev, d_c_prev;
};

/// Exact gradients of (h_t, c_t) contributions d_h, d_c through one step,
/// reusing the noise frozen in the cache.
LayerGrads step_backward(const LayerParams& params, const GateMode& mode, const StepCache& cache,
                         const Vector& d_h, const Vector& d_c);

}  // namespace g2lstm
