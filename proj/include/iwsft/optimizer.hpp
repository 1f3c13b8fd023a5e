// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace iwsft {

enum class OptimizerKind { Adam, Sgd };

struct AdamConfig {
    double beta1{0.9};
    double beta2{0.95};
    double eps{1e-8};
    double weight_decay{1e-4};  // decoupled
};

// Adam with decoupled weight decay.
class AdamState {
public:
    AdamState(std::size_t n, const AdamConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        if (params.size() != m_.size() || grad.size() != m_.size())
            throw std::invalid_argument("AdamState: size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * params[i]);
        }
    }

private:
    AdamConfig cfg_;
    long t_{0};
    std::vector<double> m_;
    std::vector<double> v_;
};

struct SgdState {
    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        if (params.size() != grad.size()) throw std::invalid_argument("SgdState: size mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    }
};

}  // namespace iwsft
