#pragma once

#include "g2lstm/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace g2lstm {

struct SgdConfig {
    double lr = 1.0;
    double decay_factor = 0.5;  // applied when validation ppl plateaus
    std::size_t patience = 2;   // evaluations without improvement before decay
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    std::variant<SgdConfig, AdamConfig> optimizer = AdamConfig{};
    double clip_norm = 2.0;
    std::size_t epochs = 1;
    std::uint64_t seed = 1;
    std::size_t window = 35;
    std::size_t batch = 20;
    std::size_t eval_every = 0;  // steps between validation evals; 0 = once per epoch

    void validate() const;
};

struct TrainLogRow {
    std::size_t step = 0;
    double train_loss = 0.0;
    std::optional<double> val_ppl;
    double grad_norm_preclip = 0.0;
    double wallclock_s = 0.0;
};

std::string train_log_csv_header();
std::string train_log_csv_row(const TrainLogRow& row);

/// Scales all gradients so the global L2 norm does not exceed max_norm.
/// Returns the pre-clip norm.
double clip_global_norm(ModelGrads& grads, double max_norm);

/// Stateful optimizer over the canonical tensor list.
class Optimizer {
public:
    Optimizer(const ModelConfig& config, std::variant<SgdConfig, AdamConfig> opt);

    void apply(Model& model, const ModelGrads& grads);
    void decay_lr(double factor);
    double learning_rate() const;

private:
    std::variant<SgdConfig, AdamConfig> opt_;
    ModelGrads m_, v_;  // Adam moments
    std::size_t step_ = 0;
};

struct TrainResult {
    Model model;       // best-validation checkpoint
    Model final_model; // parameters after the last step
    std::vector<TrainLogRow> log;
    double best_val_ppl = 0.0;
};

/// Epochs of truncated-BPTT windows: forward, backward, clip, step; periodic
/// validation keeping the best checkpoint. Aborts with std::runtime_error if
/// the loss stops being finite.
TrainResult train_loop(Model model, const std::vector<std::int32_t>& train_tokens,
                       const std::vector<std::int32_t>& valid_tokens, const TrainConfig& cfg,
                       std::ostream* progress = nullptr);

}  // namespace g2lstm
