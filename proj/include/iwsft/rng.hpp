// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace iwsft {

// Seeded generator with hand-rolled draw routines so that sampled values are
// pinned by the mt19937_64 stream alone, not by implementation-defined
// distribution adapters.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53; }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Index in [0, n).
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Draw from an explicit probability vector (need not be normalized).
    std::size_t categorical(const std::vector<double>& probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: nonpositive mass");
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            u -= probs[i];
            if (u < 0.0) return i;
        }
        return probs.size() - 1;
    }

private:
    std::mt19937_64 gen_;
    double spare_{0.0};
    bool has_spare_{false};
};

}  // namespace iwsft
