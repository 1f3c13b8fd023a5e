// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace iwsft {

// Linear warmup from 0 to peak over warmup_steps, then cosine annealing to 0
// at total_steps.
inline double warmup_cosine_lr(long step, long warmup_steps, long total_steps, double peak_lr) {
    if (step < 0 || step > total_steps) throw std::out_of_range("warmup_cosine_lr: step out of range");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw std::invalid_argument("warmup_cosine_lr: require 0 <= warmup_steps < total_steps");
    if (step < warmup_steps)
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    const double progress =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace iwsft
