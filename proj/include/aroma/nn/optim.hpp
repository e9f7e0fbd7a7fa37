#pragma once

#include "aroma/nn/params.hpp"

namespace aroma::nn {

/// Adaptive moments with decoupled weight decay.
class AdamW {
public:
    AdamW(const ParamStore& store, double weight_decay = 0.0, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8)
        : wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps),
          m_(static_cast<size_t>(store.size()), 0.0),
          v_(static_cast<size_t>(store.size()), 0.0) {}

    void step(ParamStore& store, const GradBuf& grads, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        auto& p = store.flat();
        const auto& g = grads.flat();
        for (size_t i = 0; i < p.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p[i]);
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    double wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<double> m_, v_;
};

/// Cosine annealing from lr_max at epoch 0 to lr_min at the final epoch.
inline double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min) {
    if (total_epochs <= 1) return lr_max;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

/// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_grad_norm(GradBuf& grads, double max_norm) {
    const double norm = std::sqrt(grads.squared_norm());
    if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
    return norm;
}

}  // namespace aroma::nn
