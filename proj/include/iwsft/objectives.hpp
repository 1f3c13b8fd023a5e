// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "iwsft/policy.hpp"
#include "iwsft/types.hpp"

namespace iwsft {

enum class WeightScheme { PerStepClip, Temperature };

// How the temperature k is resolved per trajectory.
enum class KMode {
    Fixed,      // k as given
    MeanScale,  // k = scale / (#masked steps): the averaged log importance weight
};

struct WeightConfig {
    WeightScheme scheme{WeightScheme::Temperature};
    // per-step ratio clip bounds (PerStepClip); applied in log space
    double alpha_min{0.2};
    double alpha_max{1.8};
    // whole-trajectory weight clip (PerStepClip)
    double beta_min{1e-3};
    double beta_max{1e3};
    KMode k_mode{KMode::MeanScale};
    double k{1.0};  // fixed k, or the scale for MeanScale
    bool normalize_batch{false};
    double hard_cap{1e6};  // overflow saturation for the Temperature scheme

    void validate() const {
        if (!(alpha_min > 0.0 && alpha_min <= 1.0 && alpha_max >= 1.0))
            throw std::invalid_argument("require 0 < alpha_min <= 1 <= alpha_max");
        if (!(beta_min > 0.0 && beta_min <= beta_max))
            throw std::invalid_argument("require 0 < beta_min <= beta_max");
        if (!(k >= 0.0)) throw std::invalid_argument("require k >= 0");
        if (!(hard_cap > 0.0)) throw std::invalid_argument("require hard_cap > 0");
    }
};

// Per masked step: log pi_q(a|s) - log pi_ref(a|s). Transition probabilities
// cancel between the two trajectory distributions and never appear.
inline std::vector<double> step_log_ratios(const Trajectory& t, const PolicyParams& theta_q,
                                           const PolicyParams& theta_ref) {
    if (theta_q.layout != theta_ref.layout)
        throw std::invalid_argument("step_log_ratios: layout mismatch");
    std::vector<double> rho;
    rho.reserve(t.steps.size());
    for (const auto& s : t.steps)
        if (s.mask) rho.push_back(log_prob(theta_q, s.state, s.action) - log_prob(theta_ref, s.state, s.action));
    return rho;
}

// w = exp(sum_i k * clip(rho_i, lo, hi)); the general smoothed/clipped
// trajectory weight both schemes reduce to.
inline double scaled_clip_weight(const std::vector<double>& rho, double k, double lo, double hi) {
    double s = 0.0;
    for (double r : rho) s += k * std::clamp(r, lo, hi);
    return std::exp(s);
}

inline double traj_weight(const std::vector<double>& rho, const WeightConfig& cfg) {
    cfg.validate();
    if (cfg.scheme == WeightScheme::PerStepClip) {
        const double w = scaled_clip_weight(rho, 1.0, std::log(cfg.alpha_min), std::log(cfg.alpha_max));
        return std::clamp(w, cfg.beta_min, cfg.beta_max);
    }
    double sum = 0.0;
    for (double r : rho) sum += r;
    double k = cfg.k;
    if (cfg.k_mode == KMode::MeanScale) {
        if (rho.empty()) throw std::invalid_argument("traj_weight: no masked steps");
        k = cfg.k / static_cast<double>(rho.size());
    }
    const double e = k * sum;
    if (e >= std::log(cfg.hard_cap)) return cfg.hard_cap;
    return std::exp(e);
}

enum class TrainMode { Sft, SftQ, IwSft, IwSftQ };

inline bool is_weighted(TrainMode m) { return m == TrainMode::IwSft || m == TrainMode::IwSftQ; }

struct LossResult {
    double loss{0.0};
    std::vector<double> grad;
    std::vector<double> weights;  // per-trajectory, in batch order
};

namespace detail {

// loss = -(1/z) * sum_j w_j * log p(tau_j; theta); gradient accumulated in a
// fixed order so equal-weight paths are bit-identical across loss kinds.
inline LossResult weighted_nll(const std::vector<const Trajectory*>& batch, const PolicyParams& theta,
                               std::vector<double> weights, double z) {
    LossResult r;
    r.grad.assign(theta.layout.param_count(), 0.0);
    const double neg_inv_z = -1.0 / z;
    double acc = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j)
        acc += weights[j] * accumulate_traj_log_prob_grad(theta, *batch[j], neg_inv_z * weights[j], r.grad);
    r.loss = neg_inv_z * acc;
    r.weights = std::move(weights);
    return r;
}

}  // namespace detail

inline LossResult sft_loss(const std::vector<const Trajectory*>& batch, const PolicyParams& theta) {
    if (batch.empty()) throw std::invalid_argument("sft_loss: empty batch");
    check_param_shape(theta);
    return detail::weighted_nll(batch, theta, std::vector<double>(batch.size(), 1.0),
                                static_cast<double>(batch.size()));
}

// Importance-weighted SFT. Weights are computed from theta_q against
// theta_ref and treated as constants: no gradient flows into either.
inline LossResult iw_sft_loss(const std::vector<const Trajectory*>& batch, const PolicyParams& theta,
                              const PolicyParams& theta_q, const PolicyParams& theta_ref,
                              const WeightConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("iw_sft_loss: empty batch");
    check_param_shape(theta);
    cfg.validate();
    std::vector<double> w(batch.size());
    double w_sum = 0.0, w_max = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        w[j] = traj_weight(step_log_ratios(*batch[j], theta_q, theta_ref), cfg);
        w_sum += w[j];
        w_max = std::max(w_max, w[j]);
    }
    if (w_max == 0.0) throw std::runtime_error("degenerate weights");
    const double z = cfg.normalize_batch ? w_sum : static_cast<double>(batch.size());
    return detail::weighted_nll(batch, theta, std::move(w), z);
}

inline LossResult loss_for(TrainMode mode, const std::vector<const Trajectory*>& batch,
                           const PolicyParams& theta, const PolicyParams& theta_q,
                           const PolicyParams& theta_ref, const WeightConfig& cfg) {
    if (is_weighted(mode)) return iw_sft_loss(batch, theta, theta_q, theta_ref, cfg);
    return sft_loss(batch, theta);
}

inline std::vector<const Trajectory*> as_batch(const std::vector<Trajectory>& trajs) {
    std::vector<const Trajectory*> b;
    b.reserve(trajs.size());
    for (const auto& t : trajs) b.push_back(&t);
    return b;
}

}  // namespace iwsft
