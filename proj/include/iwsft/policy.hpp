// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iwsft/rng.hpp"
#include "iwsft/types.hpp"

namespace iwsft {

enum class HeadKind { Categorical, Gaussian };

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Shape descriptor for a tanh MLP with either a softmax head (discrete
// actions) or a diagonal-Gaussian head with a state-independent learned
// log-std vector (continuous actions).
struct PolicyLayout {
    int input_dim{1};
    std::vector<int> hidden{};  // empty = linear model
    int output_dim{2};          // action count (categorical) or action dim (gaussian)
    HeadKind head{HeadKind::Categorical};

    bool operator==(const PolicyLayout&) const = default;

    std::vector<int> dims() const {
        std::vector<int> d;
        d.reserve(hidden.size() + 2);
        d.push_back(input_dim);
        for (int h : hidden) d.push_back(h);
        d.push_back(output_dim);
        return d;
    }

    std::size_t param_count() const {
        const auto d = dims();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < d.size(); ++l)
            n += static_cast<std::size_t>(d[l]) * d[l + 1] + d[l + 1];
        if (head == HeadKind::Gaussian) n += static_cast<std::size_t>(output_dim);
        return n;
    }

    void validate() const {
        if (input_dim <= 0 || output_dim <= 0)
            throw std::invalid_argument("layout dims must be positive");
        for (int h : hidden)
            if (h <= 0) throw std::invalid_argument("hidden dims must be positive");
        if (hidden.size() > 14) throw std::invalid_argument("too many hidden layers");
        if (head == HeadKind::Categorical && output_dim < 2)
            throw std::invalid_argument("categorical head needs >= 2 actions");
    }
};

inline PolicyLayout default_layout(const TrajectoryDataset& ds, std::vector<int> hidden = {256, 256}) {
    PolicyLayout lay;
    lay.input_dim = ds.state_dim;
    lay.hidden = std::move(hidden);
    lay.output_dim = ds.action_space.dim;
    lay.head = ds.action_space.kind == ActionSpace::Kind::Discrete ? HeadKind::Categorical
                                                                   : HeadKind::Gaussian;
    return lay;
}

struct PolicyParams {
    PolicyLayout layout;
    std::vector<double> values;

    bool operator==(const PolicyParams&) const = default;
};

inline PolicyParams zero_params(const PolicyLayout& layout) {
    layout.validate();
    return {layout, std::vector<double>(layout.param_count(), 0.0)};
}

// Weights ~ N(0, scale/sqrt(fan_in)), biases and log-std zero.
inline PolicyParams random_params(const PolicyLayout& layout, Rng& rng, double scale = 0.1) {
    PolicyParams p = zero_params(layout);
    const auto d = layout.dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        const double sd = scale / std::sqrt(static_cast<double>(d[l]));
        for (int i = 0; i < d[l] * d[l + 1]; ++i) p.values[off + i] = sd * rng.normal();
        off += static_cast<std::size_t>(d[l]) * d[l + 1] + d[l + 1];
    }
    return p;
}

inline void check_param_shape(const PolicyParams& p) {
    p.layout.validate();
    if (p.values.size() != p.layout.param_count())
        throw std::invalid_argument("parameter vector does not match layout");
    for (double v : p.values)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite parameter value");
}

namespace detail {

// Reusable buffers for the forward/backward passes; batch loops hold one and
// amortize the allocations away.
struct Scratch {
    std::vector<std::vector<double>> acts;  // acts[0] = input, acts.back() = linear output
    std::vector<double> delta;
    std::vector<double> prev;
};

inline void forward(const PolicyParams& p, const std::vector<double>& state, Scratch& sc) {
    const auto d = p.layout.dims();
    if (static_cast<int>(state.size()) != d.front())
        throw std::invalid_argument("state dimension does not match layout");
    sc.acts.resize(d.size());
    sc.acts[0].assign(state.begin(), state.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        const int in = d[l], out = d[l + 1];
        auto& z = sc.acts[l + 1];
        z.resize(out);
        const auto& x = sc.acts[l];
        for (int j = 0; j < out; ++j) {
            double acc = p.values[off + static_cast<std::size_t>(in) * out + j];  // bias
            const std::size_t row = off + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) acc += p.values[row + i] * x[i];
            z[j] = acc;
        }
        const bool last = l + 2 == d.size();
        if (!last)
            for (double& v : z) v = std::tanh(v);
        off += static_cast<std::size_t>(in) * out + out;
    }
}

// Backpropagate d(logp)/d(output) (in sc.delta) through the MLP, accumulating
// weight * gradient into grad (same length as p.values).
inline void backward(const PolicyParams& p, Scratch& sc, double weight, std::vector<double>& grad) {
    const auto d = p.layout.dims();
    std::size_t off = 0;
    std::size_t offs[16];  // layer weight-block offsets; dims() is tiny
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        offs[l] = off;
        off += static_cast<std::size_t>(d[l]) * d[l + 1] + d[l + 1];
    }
    for (std::size_t l = d.size() - 1; l-- > 0;) {
        const int in = d[l], out = d[l + 1];
        const std::size_t wo = offs[l];
        const auto& x = sc.acts[l];
        for (int j = 0; j < out; ++j) {
            const double wdj = weight * sc.delta[j];
            const std::size_t row = wo + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) grad[row + i] += wdj * x[i];
            grad[wo + static_cast<std::size_t>(in) * out + j] += wdj;
        }
        if (l == 0) break;
        sc.prev.assign(in, 0.0);
        for (int j = 0; j < out; ++j) {
            const double dj = sc.delta[j];
            const std::size_t row = wo + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) sc.prev[i] += p.values[row + i] * dj;
        }
        for (int i = 0; i < in; ++i) {
            const double a = x[i];  // post-tanh activation
            sc.prev[i] *= 1.0 - a * a;
        }
        std::swap(sc.delta, sc.prev);
    }
}

inline double log_sum_exp(const std::vector<double>& v) {
    double m = v.front();
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline std::size_t log_std_offset(const PolicyLayout& lay) {
    return lay.param_count() - static_cast<std::size_t>(lay.output_dim);
}

}  // namespace detail

// Log probability mass (categorical) or density (gaussian) of an action.
inline double log_prob(const PolicyParams& p, const std::vector<double>& state, const Action& action) {
    const auto fc = detail::forward(p, state);
    const auto& out = fc.acts.back();
    if (p.layout.head == HeadKind::Categorical) {
        if (!is_discrete(action)) throw std::invalid_argument("categorical head expects a discrete action");
        const int a = discrete_action(action);
        if (a < 0 || a >= p.layout.output_dim)
            throw std::invalid_argument("action index out of range");
        return out[a] - detail::log_sum_exp(out);
    }
    if (is_discrete(action)) throw std::invalid_argument("gaussian head expects a continuous action");
    const auto& av = continuous_action(action);
    if (static_cast<int>(av.size()) != p.layout.output_dim)
        throw std::invalid_argument("action dimension does not match layout");
    const std::size_t lso = detail::log_std_offset(p.layout);
    double lp = 0.0;
    for (int i = 0; i < p.layout.output_dim; ++i) {
        const double ls = std::clamp(p.values[lso + i], kLogStdMin, kLogStdMax);
        const double z = (av[i] - out[i]) * std::exp(-ls);
        lp += -0.5 * std::log(2.0 * std::numbers::pi) - ls - 0.5 * z * z;
    }
    return lp;
}

// Accumulates weight * d(log pi(a|s))/d(theta) into grad and returns the step
// log-probability. grad must have param_count() entries.
inline double accumulate_log_prob_grad(const PolicyParams& p, const std::vector<double>& state,
                                       const Action& action, double weight, std::vector<double>& grad) {
    const auto fc = detail::forward(p, state);
    const auto& out = fc.acts.back();
    const int k = p.layout.output_dim;
    std::vector<double> delta(k);
    double lp = 0.0;
    if (p.layout.head == HeadKind::Categorical) {
        if (!is_discrete(action)) throw std::invalid_argument("categorical head expects a discrete action");
        const int a = discrete_action(action);
        if (a < 0 || a >= k) throw std::invalid_argument("action index out of range");
        const double lse = detail::log_sum_exp(out);
        lp = out[a] - lse;
        for (int j = 0; j < k; ++j) delta[j] = (j == a ? 1.0 : 0.0) - std::exp(out[j] - lse);
    } else {
        if (is_discrete(action)) throw std::invalid_argument("gaussian head expects a continuous action");
        const auto& av = continuous_action(action);
        if (static_cast<int>(av.size()) != k)
            throw std::invalid_argument("action dimension does not match layout");
        const std::size_t lso = detail::log_std_offset(p.layout);
        for (int i = 0; i < k; ++i) {
            const double raw = p.values[lso + i];
            const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
            const double inv_sd = std::exp(-ls);
            const double z = (av[i] - out[i]) * inv_sd;
            lp += -0.5 * std::log(2.0 * std::numbers::pi) - ls - 0.5 * z * z;
            delta[i] = z * inv_sd;  // d logp / d mean_i
            const bool inside = raw > kLogStdMin && raw < kLogStdMax;
            if (inside) grad[lso + i] += weight * (z * z - 1.0);
        }
    }
    detail::backward(p, fc, std::move(delta), weight, grad);
    return lp;
}

inline std::vector<double> log_prob_grad(const PolicyParams& p, const std::vector<double>& state,
                                         const Action& action) {
    std::vector<double> grad(p.layout.param_count(), 0.0);
    accumulate_log_prob_grad(p, state, action, 1.0, grad);
    return grad;
}

// Sum of masked per-step log-probs. Transition terms are policy-independent
// and never appear here.
inline double traj_log_prob(const PolicyParams& p, const Trajectory& t) {
    double lp = 0.0;
    for (const auto& s : t.steps)
        if (s.mask) lp += log_prob(p, s.state, s.action);
    return lp;
}

inline double accumulate_traj_log_prob_grad(const PolicyParams& p, const Trajectory& t, double weight,
                                            std::vector<double>& grad) {
    double lp = 0.0;
    for (const auto& s : t.steps)
        if (s.mask) lp += accumulate_log_prob_grad(p, s.state, s.action, weight, grad);
    return lp;
}

// theta_q <- alpha * theta_q + (1 - alpha) * theta, element-wise.
inline PolicyParams ema_update(const PolicyParams& theta_q, const PolicyParams& theta, double alpha) {
    if (theta_q.layout != theta.layout) throw std::invalid_argument("ema_update: layout mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("ema_update: alpha outside [0, 1]");
    PolicyParams out = theta_q;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = alpha * theta_q.values[i] + (1.0 - alpha) * theta.values[i];
    return out;
}

// Action probabilities of a categorical policy at one state.
inline std::vector<double> action_probs(const PolicyParams& p, const std::vector<double>& state) {
    if (p.layout.head != HeadKind::Categorical)
        throw std::invalid_argument("action_probs: categorical head required");
    const auto fc = detail::forward(p, state);
    const auto& out = fc.acts.back();
    const double lse = detail::log_sum_exp(out);
    std::vector<double> probs(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) probs[i] = std::exp(out[i] - lse);
    return probs;
}

// Gaussian head mean and per-dim std at one state.
inline std::pair<std::vector<double>, std::vector<double>> gaussian_moments(
    const PolicyParams& p, const std::vector<double>& state) {
    if (p.layout.head != HeadKind::Gaussian)
        throw std::invalid_argument("gaussian_moments: gaussian head required");
    const auto fc = detail::forward(p, state);
    const std::size_t lso = detail::log_std_offset(p.layout);
    std::vector<double> sd(p.layout.output_dim);
    for (int i = 0; i < p.layout.output_dim; ++i)
        sd[i] = std::exp(std::clamp(p.values[lso + i], kLogStdMin, kLogStdMax));
    return {fc.acts.back(), sd};
}

}  // namespace iwsft
