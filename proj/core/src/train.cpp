#include "g2lstm/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace g2lstm {

void TrainConfig::validate() const {
    if (!(clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be > 0");
    if (window == 0 || batch == 0 || epochs == 0)
        throw std::invalid_argument("TrainConfig: window, batch and epochs must be >= 1");
    const double lr = std::holds_alternative<SgdConfig>(optimizer)
                          ? std::get<SgdConfig>(optimizer).lr
                          : std::get<AdamConfig>(optimizer).lr;
    if (lr < 0.0) throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
}

std::string train_log_csv_header() {
    return "step,train_loss,val_ppl,grad_norm_preclip,wallclock_s";
}

std::string train_log_csv_row(const TrainLogRow& row) {
    std::ostringstream ss;
    ss.precision(10);
    ss << row.step << ',' << row.train_loss << ',';
    if (row.val_ppl) ss << *row.val_ppl;
    ss << ',' << row.grad_norm_preclip << ',' << row.wallclock_s;
    return ss.str();
}

namespace {

template <typename M>
std::vector<std::vector<double>*> tensor_ptrs(M& m) {
    std::vector<std::vector<double>*> out;
    for_each_tensor(m, [&](const std::string&, std::vector<double>& data) { out.push_back(&data); });
    return out;
}

template <typename M>
std::vector<const std::vector<double>*> tensor_ptrs_const(const M& m) {
    std::vector<const std::vector<double>*> out;
    for_each_tensor(m, [&](const std::string&, const std::vector<double>& data) {
        out.push_back(&data);
    });
    return out;
}

}  // namespace

double clip_global_norm(ModelGrads& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be > 0");
    double sq = 0.0;
    for (const auto* t : tensor_ptrs_const(grads)) {
        for (double v : *t) sq += v * v;
    }
    const double pre_norm = std::sqrt(sq);
    if (pre_norm > max_norm) {
        const double scale = max_norm / pre_norm;
        for (auto* t : tensor_ptrs(grads)) {
            for (double& v : *t) v *= scale;
        }
    }
    return pre_norm;
}

Optimizer::Optimizer(const ModelConfig& config, std::variant<SgdConfig, AdamConfig> opt)
    : opt_(std::move(opt)) {
    if (std::holds_alternative<AdamConfig>(opt_)) {
        m_ = zero_grads(config);
        v_ = zero_grads(config);
    }
}

double Optimizer::learning_rate() const {
    return std::holds_alternative<SgdConfig>(opt_) ? std::get<SgdConfig>(opt_).lr
                                                   : std::get<AdamConfig>(opt_).lr;
}

void Optimizer::decay_lr(double factor) {
    if (auto* sgd = std::get_if<SgdConfig>(&opt_)) {
        sgd->lr *= factor;
    } else {
        std::get<AdamConfig>(opt_).lr *= factor;
    }
}

void Optimizer::apply(Model& model, const ModelGrads& grads) {
    auto params = tensor_ptrs(model);
    auto gs = tensor_ptrs_const(grads);
    if (params.size() != gs.size()) throw std::invalid_argument("optimizer: tensor list mismatch");

    if (const auto* sgd = std::get_if<SgdConfig>(&opt_)) {
        for (std::size_t t = 0; t < params.size(); ++t) {
            auto& p = *params[t];
            const auto& g = *gs[t];
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= sgd->lr * g[i];
        }
    } else {
        const auto& adam = std::get<AdamConfig>(opt_);
        ++step_;
        const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step_));
        auto ms = tensor_ptrs(m_);
        auto vs = tensor_ptrs(v_);
        for (std::size_t t = 0; t < params.size(); ++t) {
            auto& p = *params[t];
            const auto& g = *gs[t];
            auto& m = *ms[t];
            auto& v = *vs[t];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
                v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
            }
        }
    }
    model.sync_tied_output();
}

TrainResult train_loop(Model model, const std::vector<std::int32_t>& train_tokens,
                       const std::vector<std::int32_t>& valid_tokens, const TrainConfig& cfg,
                       std::ostream* progress) {
    cfg.validate();
    model.config.validate();
    const BatchStream stream = BatchStream::from_tokens(train_tokens, cfg.batch);
    const RngState root(cfg.seed);
    Optimizer opt(model.config, cfg.optimizer);

    const std::size_t steps_per_epoch = (stream.steps - 2) / cfg.window + 1;
    const std::size_t eval_every = cfg.eval_every == 0 ? steps_per_epoch : cfg.eval_every;

    TrainResult result;
    result.best_val_ppl = std::numeric_limits<double>::infinity();
    Model best_model = model;
    std::size_t evals_since_improve = 0;
    std::size_t global_step = 0;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    auto run_validation = [&](TrainLogRow& row) {
        const double ppl = perplexity_eval(model, valid_tokens, cfg.batch, cfg.window);
        row.val_ppl = ppl;
        if (ppl < result.best_val_ppl) {
            result.best_val_ppl = ppl;
            best_model = model;
            evals_since_improve = 0;
        } else if (std::holds_alternative<SgdConfig>(cfg.optimizer)) {
            const auto& sgd = std::get<SgdConfig>(cfg.optimizer);
            if (++evals_since_improve >= sgd.patience) {
                opt.decay_lr(sgd.decay_factor);
                evals_since_improve = 0;
                if (progress) *progress << "# lr decayed to " << opt.learning_rate() << "\n";
            }
        } else {
            ++evals_since_improve;
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        LstmState state = zero_state(model.config, cfg.batch);
        double epoch_loss = 0.0;
        std::size_t epoch_windows = 0;
        for (std::size_t start = 0; start + 1 < stream.steps; start += cfg.window) {
            const WindowBatch win = make_window(stream, start, cfg.window);
            const RngState noise_root = root.derive({3, global_step});
            ForwardResult fwd = forward_sequence(model, win, state, /*training=*/true, noise_root);
            if (!std::isfinite(fwd.loss)) {
                throw std::runtime_error("train_loop: loss diverged (non-finite) at step " +
                                         std::to_string(global_step));
            }
            state = std::move(fwd.final_state);  // detached between windows
            ModelGrads grads = backward_sequence(model, fwd);
            const double pre_norm = clip_global_norm(grads, cfg.clip_norm);
            if (!std::isfinite(pre_norm)) {
                throw std::runtime_error("train_loop: gradient diverged (non-finite) at step " +
                                         std::to_string(global_step));
            }
            opt.apply(model, grads);
            ++global_step;
            epoch_loss += fwd.loss;
            ++epoch_windows;

            TrainLogRow row;
            row.step = global_step;
            row.train_loss = fwd.loss;
            row.grad_norm_preclip = pre_norm;
            if (global_step % eval_every == 0) run_validation(row);
            row.wallclock_s = elapsed();
            result.log.push_back(row);
        }
        if (progress) {
            *progress << "epoch " << (epoch + 1) << "/" << cfg.epochs << " mean_loss "
                      << (epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_windows)))
                      << " best_val_ppl " << result.best_val_ppl << " lr " << opt.learning_rate()
                      << " elapsed_s " << elapsed() << "\n";
            progress->flush();
        }
    }

    if (result.log.empty() || !result.log.back().val_ppl) {
        TrainLogRow row;
        row.step = global_step;
        row.train_loss = result.log.empty() ? 0.0 : result.log.back().train_loss;
        run_validation(row);
        row.wallclock_s = elapsed();
        result.log.push_back(row);
    }

    result.final_model = std::move(model);
    result.model = std::move(best_model);
    return result;
}

}  // namespace g2lstm
