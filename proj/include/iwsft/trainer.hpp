// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "iwsft/curation.hpp"
#include "iwsft/objectives.hpp"
#include "iwsft/optimizer.hpp"
#include "iwsft/policy.hpp"
#include "iwsft/rng.hpp"
#include "iwsft/schedule.hpp"

namespace iwsft {

enum class QUpdateMode { Periodic, Ema };

struct TrainConfig {
    TrainMode mode{TrainMode::Sft};
    int batch_size{256};
    long total_steps{4500};
    long warmup_steps{300};
    double peak_lr{4e-5};
    OptimizerKind optimizer{OptimizerKind::Adam};
    AdamConfig adam{};
    QUpdateMode q_update{QUpdateMode::Ema};
    long period{100};        // Periodic: copy theta into theta_q every `period` steps
    double ema_alpha{0.99};  // Ema: theta_q <- a*theta_q + (1-a)*theta each step
    WeightConfig weight_cfg{};
    std::uint64_t seed{0};

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
        if (total_steps > 0 && !(warmup_steps >= 0 && warmup_steps < total_steps))
            throw std::invalid_argument("require 0 <= warmup_steps < total_steps");
        if (!(peak_lr >= 0.0)) throw std::invalid_argument("peak_lr must be nonnegative");
        if (period < 1) throw std::invalid_argument("period must be >= 1");
        if (!(ema_alpha >= 0.0 && ema_alpha < 1.0)) throw std::invalid_argument("ema_alpha outside [0, 1)");
        weight_cfg.validate();
    }
};

struct MetricsRow {
    long step{0};
    double loss{0.0};
    double lr{0.0};
    double grad_norm{0.0};
    double w_mean{1.0};
    double w_min{1.0};
    double w_max{1.0};
};

struct TrainResult {
    PolicyParams params;
    std::vector<MetricsRow> metrics;
    bool aborted{false};
    std::string abort_reason;
};

// Test instrumentation hook, called after each optimizer + q update.
using StepObserver = std::function<void(long step, const PolicyParams& theta, const PolicyParams& theta_q)>;

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// One full optimization run: theta and theta_q start at theta_ref, batches are
// drawn multiplicity-proportionally, theta_q lags theta per q_update mode.
// theta_ref stays frozen throughout.
inline TrainResult train(const CuratedDataset& data, const PolicyParams& theta_ref,
                         const TrainConfig& cfg, const StepObserver& observer = {}) {
    cfg.validate();
    check_param_shape(theta_ref);
    validate_curated(data);
    if (theta_ref.layout.input_dim != data.source->state_dim)
        throw std::invalid_argument("train: layout does not match dataset state_dim");

    TrainResult res{theta_ref, {}, false, ""};
    if (cfg.total_steps == 0) return res;

    PolicyParams& theta = res.params;
    PolicyParams theta_q = theta_ref;
    Rng rng(cfg.seed);
    AdamState adam(theta.values.size(), cfg.adam);
    SgdState sgd;
    res.metrics.reserve(static_cast<std::size_t>(cfg.total_steps));

    for (long step = 0; step < cfg.total_steps; ++step) {
        const double lr = warmup_cosine_lr(step, cfg.warmup_steps, cfg.total_steps, cfg.peak_lr);
        const auto indices = sample_indices(data, static_cast<std::size_t>(cfg.batch_size), rng);
        std::vector<const Trajectory*> batch;
        batch.reserve(indices.size());
        for (std::size_t idx : indices) batch.push_back(&data.source->trajectories[idx]);

        const LossResult loss_res = loss_for(cfg.mode, batch, theta, theta_q, theta_ref, cfg.weight_cfg);
        const double gnorm = l2_norm(loss_res.grad);

        MetricsRow row{step, loss_res.loss, lr, gnorm, 1.0, 1.0, 1.0};
        if (is_weighted(cfg.mode)) {
            double wsum = 0.0, wmin = loss_res.weights.front(), wmax = loss_res.weights.front();
            for (double w : loss_res.weights) {
                wsum += w;
                wmin = std::min(wmin, w);
                wmax = std::max(wmax, w);
            }
            row.w_mean = wsum / static_cast<double>(loss_res.weights.size());
            row.w_min = wmin;
            row.w_max = wmax;
        }

        if (!std::isfinite(loss_res.loss) || !std::isfinite(gnorm)) {
            res.metrics.push_back(row);
            res.aborted = true;
            res.abort_reason = "non-finite loss or gradient at step " + std::to_string(step);
            return res;
        }

        if (cfg.optimizer == OptimizerKind::Adam)
            adam.step(theta.values, loss_res.grad, lr);
        else
            sgd.step(theta.values, loss_res.grad, lr);

        if (cfg.q_update == QUpdateMode::Ema)
            theta_q = ema_update(theta_q, theta, cfg.ema_alpha);
        else if ((step + 1) % cfg.period == 0)
            theta_q = theta;

        res.metrics.push_back(row);
        if (observer) observer(step, theta, theta_q);
    }
    return res;
}

// Maximum-likelihood fit over the full (unfiltered) dataset; the result serves
// as both the reference policy and the fine-tuning initialization.
inline PolicyParams pretrain_bc(const TrajectoryDataset& ds, const PolicyLayout& layout, long steps,
                                double lr, int batch_size = 32, std::uint64_t seed = 0) {
    validate_dataset(ds);
    layout.validate();
    auto shared = std::make_shared<TrajectoryDataset>(ds);
    const CuratedDataset all = curate_all(shared);

    Rng init_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    PolicyParams start = random_params(layout, init_rng);

    TrainConfig cfg;
    cfg.mode = TrainMode::Sft;
    cfg.batch_size = batch_size;
    cfg.total_steps = steps;
    cfg.warmup_steps = 0;
    cfg.peak_lr = lr;
    cfg.seed = seed;
    TrainResult r = train(all, start, cfg);
    if (r.aborted) throw std::runtime_error("behavior cloning diverged: " + r.abort_reason);
    return r.params;
}

}  // namespace iwsft
