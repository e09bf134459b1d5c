#pragma once

#include "propdet/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace propdet {

enum class LrSchedule {
    kConstant,     // warmup then flat
    kLinearDecay,  // warmup then linear decay to zero over total_steps
};

struct OptimizerConfig {
    double learning_rate = 1e-3;
    int warmup_steps = 500;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    LrSchedule schedule = LrSchedule::kConstant;
    std::int64_t total_steps = 0;  // only consulted by the decay schedule
};

// Learning rate at 1-indexed step s: base * s / warmup during warmup, then
// flat (or linearly decayed when configured).
inline double scheduled_lr(const OptimizerConfig& cfg, std::int64_t step) {
    double lr = cfg.learning_rate;
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    if (cfg.schedule == LrSchedule::kLinearDecay && cfg.total_steps > cfg.warmup_steps) {
        const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
        const double done = static_cast<double>(step - cfg.warmup_steps);
        lr *= std::max(0.0, 1.0 - done / span);
    }
    return lr;
}

// AdamW with decoupled weight decay over a fixed tensor layout.
class AdamW {
public:
    AdamW(std::vector<TensorRef> params, OptimizerConfig config)
        : params_(std::move(params)), config_(config) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].size, 0.0);
            v_[i].assign(params_[i].size, 0.0);
        }
    }

    // `grads` must enumerate the same tensors in the same order as `params`.
    void step(const std::vector<TensorRef>& grads) {
        if (grads.size() != params_.size())
            throw std::invalid_argument("optimizer step: gradient layout mismatch");
        ++step_count_;
        const double lr = scheduled_lr(config_, step_count_);
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            double* theta = params_[i].data;
            const double* g = grads[i].data;
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < params_[i].size; ++j) {
                m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
                v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
                const double m_hat = m[j] / bc1;
                const double v_hat = v[j] / bc2;
                theta[j] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                                  config_.weight_decay * theta[j]);
            }
        }
    }

    std::int64_t step_count() const { return step_count_; }
    double current_lr() const { return scheduled_lr(config_, step_count_ + 1); }

private:
    std::vector<TensorRef> params_;
    OptimizerConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t step_count_ = 0;
};

}  // namespace propdet
