// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "iwsft/policy.hpp"
#include "iwsft/rng.hpp"
#include "iwsft/types.hpp"

namespace iwsft {

// ---------------------------------------------------------------------------
// Two-armed bandit: one dummy state, episode ends after a single pull.
// Action 0 = pull-left, action 1 = pull-right; reward is Bernoulli per arm.
// ---------------------------------------------------------------------------
struct BanditSpec {
    double p_left_success{0.5};
    double p_right_success{1.0};

    void validate() const {
        if (!(p_left_success >= 0.0 && p_left_success <= 1.0 && p_right_success >= 0.0 &&
              p_right_success <= 1.0))
            throw std::invalid_argument("bandit success probabilities must lie in [0, 1]");
    }
};

inline const std::vector<double>& bandit_state() {
    static const std::vector<double> s{1.0};
    return s;
}

inline PolicyLayout bandit_layout(std::vector<int> hidden = {}) {
    return PolicyLayout{1, std::move(hidden), 2, HeadKind::Categorical};
}

inline TrajectoryDataset generate_bandit_data(const BanditSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("generate_bandit_data: n must be >= 1");
    Rng rng(seed);
    TrajectoryDataset ds;
    ds.state_dim = 1;
    ds.action_space = {ActionSpace::Kind::Discrete, 2};
    ds.trajectories.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int a = rng.bernoulli(0.5) ? 1 : 0;  // uniform behavior policy
        const double p = a == 0 ? spec.p_left_success : spec.p_right_success;
        const double r = rng.bernoulli(p) ? 1.0 : 0.0;
        ds.trajectories.push_back({{{bandit_state(), a, true}}, r});
    }
    return ds;
}

inline Trajectory rollout(const PolicyParams& theta, const BanditSpec& spec, Rng& rng) {
    const auto probs = action_probs(theta, bandit_state());
    const int a = static_cast<int>(rng.categorical(probs));
    const double p = a == 0 ? spec.p_left_success : spec.p_right_success;
    const double r = rng.bernoulli(p) ? 1.0 : 0.0;
    return {{{bandit_state(), a, true}}, r};
}

inline double exact_j(const PolicyParams& theta, const BanditSpec& spec) {
    spec.validate();
    const auto probs = action_probs(theta, bandit_state());
    return probs[0] * spec.p_left_success + probs[1] * spec.p_right_success;
}

// Exact value of E_ref[(q/pi_ref) (1 + log(p/q)) R], constant included. The
// Bernoulli reward outcome is environment randomness, so it enters only
// through the per-arm mean reward.
inline double exact_bound(const PolicyParams& theta, const PolicyParams& theta_q,
                          const PolicyParams& theta_ref, const BanditSpec& spec) {
    spec.validate();
    const auto& s = bandit_state();
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
        const double lp = log_prob(theta, s, Action{a});
        const double lq = log_prob(theta_q, s, Action{a});
        const double lref = log_prob(theta_ref, s, Action{a});
        if (!std::isfinite(lref)) throw std::runtime_error("exact_bound: reference support violation");
        const double mean_r = a == 0 ? spec.p_left_success : spec.p_right_success;
        total += std::exp(lq) * (1.0 + lp - lq) * mean_r;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Enumerable chain MDP: short horizon, two actions, explicit stochastic
// transitions, terminal reward per final state. States feed the policy
// one-hot.
// ---------------------------------------------------------------------------
struct ChainMDPSpec {
    static constexpr int kNumActions = 2;

    int horizon{3};
    int num_states{3};
    std::vector<double> initial;                              // p(s0)
    std::vector<std::vector<std::vector<double>>> transition; // [s][a][s']
    std::vector<double> terminal_reward;                      // >= 0, per state

    void validate() const {
        if (horizon < 1 || horizon > 5) throw std::invalid_argument("chain horizon must be in [1, 5]");
        if (num_states < 2) throw std::invalid_argument("chain needs >= 2 states");
        auto check_row = [&](const std::vector<double>& row) {
            if (static_cast<int>(row.size()) != num_states)
                throw std::invalid_argument("transition row size mismatch");
            double s = 0.0;
            for (double p : row) {
                if (p < 0.0) throw std::invalid_argument("negative transition probability");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("transition row must sum to 1");
        };
        if (static_cast<int>(initial.size()) != num_states)
            throw std::invalid_argument("initial distribution size mismatch");
        check_row(initial);
        if (static_cast<int>(transition.size()) != num_states)
            throw std::invalid_argument("transition table size mismatch");
        for (const auto& per_state : transition) {
            if (static_cast<int>(per_state.size()) != kNumActions)
                throw std::invalid_argument("transition table action count mismatch");
            for (const auto& row : per_state) check_row(row);
        }
        if (static_cast<int>(terminal_reward.size()) != num_states)
            throw std::invalid_argument("terminal reward table size mismatch");
        for (double r : terminal_reward)
            if (r < 0.0) throw std::invalid_argument("terminal rewards must be >= 0");
    }
};

inline std::vector<double> one_hot(int s, int n) {
    std::vector<double> v(n, 0.0);
    v[s] = 1.0;
    return v;
}

inline PolicyLayout chain_layout(const ChainMDPSpec& spec, std::vector<int> hidden = {}) {
    return PolicyLayout{spec.num_states, std::move(hidden), ChainMDPSpec::kNumActions,
                        HeadKind::Categorical};
}

// Three-state advance/stay chain with slippage; reaching the far state pays 1,
// the middle state a quarter.
inline ChainMDPSpec default_chain_spec() {
    ChainMDPSpec s;
    s.horizon = 3;
    s.num_states = 3;
    s.initial = {1.0, 0.0, 0.0};
    s.transition = {
        // state 0
        {{0.9, 0.1, 0.0},   // action 0: stay (slight drift)
         {0.2, 0.8, 0.0}},  // action 1: advance
        // state 1
        {{0.2, 0.8, 0.0},   // action 0: fall back sometimes
         {0.0, 0.2, 0.8}},  // action 1: advance
        // state 2
        {{0.0, 0.3, 0.7},   // action 0: slip back
         {0.0, 0.0, 1.0}},  // action 1: hold
    };
    s.terminal_reward = {0.0, 0.25, 1.0};
    return s;
}

struct EnumeratedTrajectory {
    Trajectory traj;
    double env_prob{1.0};     // p(s0) * prod p(s'|s,a): the policy-free factor
    std::vector<int> states;  // visited states, length horizon + 1
};

// Every (state, action, outcome) path with positive environment probability,
// exactly once.
inline std::vector<EnumeratedTrajectory> enumerate_trajectories(const ChainMDPSpec& spec,
                                                                std::size_t max_paths = 10000) {
    spec.validate();
    std::vector<EnumeratedTrajectory> out;
    struct Frame {
        int state;
        double prob;
        std::vector<Step> steps;
        std::vector<int> visited;
    };
    std::vector<Frame> stack;
    for (int s0 = 0; s0 < spec.num_states; ++s0)
        if (spec.initial[s0] > 0.0) stack.push_back({s0, spec.initial[s0], {}, {s0}});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (static_cast<int>(f.steps.size()) == spec.horizon) {
            Trajectory t{std::move(f.steps), spec.terminal_reward[f.state]};
            out.push_back({std::move(t), f.prob, std::move(f.visited)});
            if (out.size() > max_paths) throw std::runtime_error("trajectory space too large to enumerate");
            continue;
        }
        for (int a = 0; a < ChainMDPSpec::kNumActions; ++a) {
            for (int ns = 0; ns < spec.num_states; ++ns) {
                const double p = spec.transition[f.state][a][ns];
                if (p <= 0.0) continue;
                Frame nf = f;
                nf.steps.push_back({one_hot(f.state, spec.num_states), a, true});
                nf.prob *= p;
                nf.state = ns;
                nf.visited.push_back(ns);
                stack.push_back(std::move(nf));
            }
        }
    }
    return out;
}

// J(theta) = sum over paths of env_prob * prod pi(a|s) * R, computed exactly.
inline double exact_j(const PolicyParams& theta, const std::vector<EnumeratedTrajectory>& paths) {
    double total = 0.0;
    for (const auto& e : paths)
        total += e.env_prob * std::exp(traj_log_prob(theta, e.traj)) * e.traj.ret;
    return total;
}

inline double exact_j(const PolicyParams& theta, const ChainMDPSpec& spec) {
    return exact_j(theta, enumerate_trajectories(spec));
}

// Exact iw lower bound including the constant term:
//   sum over paths of q(tau) * (1 + log p(tau;theta) - log q(tau)) * R(tau).
// With theta_q = theta_ref this is the plain SFT bound.
inline double exact_bound(const PolicyParams& theta, const PolicyParams& theta_q,
                          const PolicyParams& theta_ref,
                          const std::vector<EnumeratedTrajectory>& paths) {
    double total = 0.0;
    for (const auto& e : paths) {
        const double lp = traj_log_prob(theta, e.traj);
        const double lq = traj_log_prob(theta_q, e.traj);
        const double lref = traj_log_prob(theta_ref, e.traj);
        if (!std::isfinite(lref)) throw std::runtime_error("exact_bound: reference support violation");
        total += e.env_prob * std::exp(lq) * (1.0 + lp - lq) * e.traj.ret;
    }
    return total;
}

inline double exact_bound(const PolicyParams& theta, const PolicyParams& theta_q,
                          const PolicyParams& theta_ref, const ChainMDPSpec& spec) {
    return exact_bound(theta, theta_q, theta_ref, enumerate_trajectories(spec));
}

// Trajectory-level KL(p_theta || p_theta_ref); environment factors cancel in
// the log but weight the expectation.
inline double trajectory_kl(const PolicyParams& theta, const PolicyParams& theta_ref,
                            const std::vector<EnumeratedTrajectory>& paths) {
    double kl = 0.0;
    for (const auto& e : paths) {
        const double lp = traj_log_prob(theta, e.traj);
        const double lref = traj_log_prob(theta_ref, e.traj);
        kl += e.env_prob * std::exp(lp) * (lp - lref);
    }
    return kl;
}

inline double trajectory_kl(const PolicyParams& theta, const PolicyParams& theta_ref,
                            const ChainMDPSpec& spec) {
    return trajectory_kl(theta, theta_ref, enumerate_trajectories(spec));
}

inline Trajectory rollout(const PolicyParams& theta, const ChainMDPSpec& spec, Rng& rng) {
    int s = static_cast<int>(rng.categorical(spec.initial));
    Trajectory t;
    for (int step = 0; step < spec.horizon; ++step) {
        const auto probs = action_probs(theta, one_hot(s, spec.num_states));
        const int a = static_cast<int>(rng.categorical(probs));
        t.steps.push_back({one_hot(s, spec.num_states), a, true});
        s = static_cast<int>(rng.categorical(spec.transition[s][a]));
    }
    t.ret = spec.terminal_reward[s];
    return t;
}

// Dataset from the uniform-random behavior policy.
inline TrajectoryDataset generate_chain_data(const ChainMDPSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("generate_chain_data: n must be >= 1");
    Rng rng(seed);
    TrajectoryDataset ds;
    ds.state_dim = spec.num_states;
    ds.action_space = {ActionSpace::Kind::Discrete, ChainMDPSpec::kNumActions};
    ds.trajectories.reserve(n);
    const std::vector<double> uniform(ChainMDPSpec::kNumActions, 1.0 / ChainMDPSpec::kNumActions);
    for (std::size_t i = 0; i < n; ++i) {
        int s = static_cast<int>(rng.categorical(spec.initial));
        Trajectory t;
        for (int step = 0; step < spec.horizon; ++step) {
            const int a = static_cast<int>(rng.categorical(uniform));
            t.steps.push_back({one_hot(s, spec.num_states), a, true});
            s = static_cast<int>(rng.categorical(spec.transition[s][a]));
        }
        t.ret = spec.terminal_reward[s];
        ds.trajectories.push_back(std::move(t));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// 2-D point-mass reaching: fixed start, goal at the origin, velocity-command
// actions clipped to a box. Return is the negative summed distance to goal,
// giving a continuous quality spectrum.
// ---------------------------------------------------------------------------
struct PointMassSpec {
    int horizon{50};
    double dt{0.1};
    double gain{2.0};  // proportional controller gain
    std::array<double, 2> start{1.2, -0.9};
    double action_limit{1.0};
};

inline PolicyLayout pointmass_layout(std::vector<int> hidden = {256, 256}) {
    return PolicyLayout{2, std::move(hidden), 2, HeadKind::Gaussian};
}

// Scripted proportional controller with optional Gaussian action noise; the
// recorded action is the executed (clipped) command.
inline TrajectoryDataset generate_pointmass_data(std::size_t n, double controller_noise,
                                                 std::uint64_t seed, const PointMassSpec& spec = {}) {
    if (n < 1) throw std::invalid_argument("generate_pointmass_data: n must be >= 1");
    Rng rng(seed);
    TrajectoryDataset ds;
    ds.state_dim = 2;
    ds.action_space = {ActionSpace::Kind::Continuous, 2};
    ds.trajectories.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 2> pos = spec.start;
        Trajectory t;
        double ret = 0.0;
        for (int step = 0; step < spec.horizon; ++step) {
            std::vector<double> state{pos[0], pos[1]};
            std::vector<double> act(2);
            for (int d = 0; d < 2; ++d) {
                const double cmd = -spec.gain * pos[d] + controller_noise * rng.normal();
                act[d] = std::clamp(cmd, -spec.action_limit, spec.action_limit);
            }
            for (int d = 0; d < 2; ++d) pos[d] += spec.dt * act[d];
            ret -= std::sqrt(pos[0] * pos[0] + pos[1] * pos[1]);
            t.steps.push_back({std::move(state), Action{act}, true});
        }
        t.ret = ret;
        ds.trajectories.push_back(std::move(t));
    }
    return ds;
}

inline Trajectory rollout(const PolicyParams& theta, const PointMassSpec& spec, Rng& rng) {
    std::array<double, 2> pos = spec.start;
    Trajectory t;
    double ret = 0.0;
    for (int step = 0; step < spec.horizon; ++step) {
        std::vector<double> state{pos[0], pos[1]};
        const auto [mean, sd] = gaussian_moments(theta, state);
        std::vector<double> act(2);
        for (int d = 0; d < 2; ++d) {
            const double cmd = mean[d] + sd[d] * rng.normal();
            act[d] = std::clamp(cmd, -spec.action_limit, spec.action_limit);
        }
        for (int d = 0; d < 2; ++d) pos[d] += spec.dt * act[d];
        ret -= std::sqrt(pos[0] * pos[0] + pos[1] * pos[1]);
        t.steps.push_back({std::move(state), Action{act}, true});
    }
    t.ret = ret;
    return t;
}

// ---------------------------------------------------------------------------
// Monte-Carlo policy evaluation.
// ---------------------------------------------------------------------------
struct McResult {
    double mean{0.0};
    double stderr_of_mean{0.0};
    std::size_t episodes{0};
};

template <typename EnvSpec>
McResult mc_return(const PolicyParams& theta, const EnvSpec& env, std::size_t episodes,
                   std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("mc_return: episodes must be >= 1");
    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < episodes; ++i) {
        const double r = rollout(theta, env, rng).ret;
        sum += r;
        sum_sq += r * r;
    }
    const double n = static_cast<double>(episodes);
    const double mean = sum / n;
    double se = 0.0;
    if (episodes > 1) {
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        se = std::sqrt(var / n);
    }
    return {mean, se, episodes};
}

// Random parameter perturbation scaled by bisection until the trajectory KL
// against theta_ref hits target_kl (within 2 percent or 80 iterations).
inline PolicyParams perturb_to_kl(const PolicyParams& theta_ref,
                                  const std::vector<EnumeratedTrajectory>& paths, double target_kl,
                                  Rng& rng) {
    if (target_kl <= 0.0) return theta_ref;
    std::vector<double> dir(theta_ref.values.size());
    double norm = 0.0;
    for (double& d : dir) {
        d = rng.normal();
        norm += d * d;
    }
    norm = std::sqrt(norm);
    for (double& d : dir) d /= norm;

    auto at = [&](double eps) {
        PolicyParams p = theta_ref;
        for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] += eps * dir[i];
        return p;
    };
    double hi = 0.1;
    int guard = 0;
    while (trajectory_kl(at(hi), theta_ref, paths) < target_kl && guard++ < 60) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double kl = trajectory_kl(at(mid), theta_ref, paths);
        if (std::abs(kl - target_kl) <= 0.02 * target_kl) return at(mid);
        (kl < target_kl ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

}  // namespace iwsft
