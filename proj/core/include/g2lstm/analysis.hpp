#pragma once

#include "g2lstm/network.hpp"
#include "g2lstm/vocab.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace g2lstm {

/// Distribution of gate activations over a corpus sample: 50 equal-width bins
/// on [0,1] plus the saturation fractions in [0,0.1] and [0.9,1].
struct GateHistogram {
    static constexpr std::size_t kBins = 50;
    std::array<std::uint64_t, kBins> counts{};
    std::uint64_t total = 0;
    double saturation_low = 0.0;
    double saturation_high = 0.0;

    void add(double value);
    void finalize();
    double saturation() const { return saturation_low + saturation_high; }

private:
    std::uint64_t low_ = 0, high_ = 0;
};

struct GateHistogramPair {
    GateHistogram input, forget;
};

/// Tallies every input/forget gate coordinate of one layer at every timestep
/// of the sample, in evaluation mode. Throws on an empty sample.
GateHistogramPair collect_gate_histograms(const Model& model,
                                          const std::vector<std::int32_t>& sample,
                                          std::size_t layer_index);

std::string gate_histogram_csv(const GateHistogram& hist);

/// Per-token mean gate activations (over the hidden dimension) of one layer.
struct TimestepGateTrace {
    std::vector<std::string> tokens;
    std::vector<double> avg_input_gate;
    std::vector<double> avg_forget_gate;
};

/// Unknown tokens map to <unk>.
TimestepGateTrace trace_sentence(const Model& model, const Vocabulary& vocab,
                                 const std::vector<std::string>& tokens,
                                 std::size_t layer_index);

std::string trace_csv(const TimestepGateTrace& trace);

/// |a-b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;  // analytic/numeric values at the worst coordinate
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
    double h = 0.0;
    double tol = 0.0;
    bool passed = false;
};

/// Central finite differences of the window loss against the analytic
/// gradients, per parameter block, with noise and dropout masks frozen by the
/// seed. Intended for small models (<= ~10^4 parameters).
GradCheckReport grad_check(const Model& model, const WindowBatch& win, std::uint64_t noise_seed,
                           double h, double tol);

/// The (seeded, random) initial state grad_check evaluates at; random rather
/// than zero so recurrent weights see gradient signal at t=0.
LstmState grad_check_init_state(const ModelConfig& config, std::size_t batch,
                                std::uint64_t noise_seed);

/// The comparison half of grad_check, exposed so corrupted gradients can be
/// fed through it directly.
GradCheckReport compare_grads(const ModelGrads& analytic, const ModelGrads& numeric, double h,
                              double tol);

/// Finite-difference gradients of the forward loss (the oracle side). The
/// loss is evaluated by an independent scalar long-double reference forward,
/// which keeps the central-difference noise floor well below the tolerance.
ModelGrads finite_difference_grads(const Model& model, const WindowBatch& win,
                                   std::uint64_t noise_seed, double h);

/// The reference forward itself (same noise/dropout streams as the batched
/// implementation, plain scalar arithmetic in long double).
double reference_forward_loss(const Model& model, const WindowBatch& win,
                              const LstmState& init_state, bool training, RngState noise_root);

std::string grad_check_csv(const GradCheckReport& report);

}  // namespace g2lstm
