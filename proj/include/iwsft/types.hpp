// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace iwsft {

// A discrete action index or a continuous action vector. A dataset commits to
// one kind for all of its trajectories.
using Action = std::variant<int, std::vector<double>>;

inline bool is_discrete(const Action& a) { return std::holds_alternative<int>(a); }
inline int discrete_action(const Action& a) { return std::get<int>(a); }
inline const std::vector<double>& continuous_action(const Action& a) {
    return std::get<std::vector<double>>(a);
}

struct ActionSpace {
    enum class Kind { Discrete, Continuous };
    Kind kind{Kind::Discrete};
    int dim{0};  // number of choices (discrete) or vector dimension (continuous)

    bool operator==(const ActionSpace&) const = default;
};

struct Step {
    std::vector<double> state;
    Action action{0};
    bool mask{true};  // false marks padding; padded steps never enter a likelihood

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;
    double ret{0.0};  // cumulative undiscounted reward

    bool operator==(const Trajectory&) const = default;

    // Number of mask=1 steps; must be >= 1 for a valid trajectory.
    int length() const {
        int n = 0;
        for (const auto& s : steps) n += s.mask ? 1 : 0;
        return n;
    }
};

struct TrajectoryDataset {
    std::vector<Trajectory> trajectories;
    int state_dim{0};
    ActionSpace action_space{};

    bool operator==(const TrajectoryDataset&) const = default;
};

inline void validate_step(const Step& s, int state_dim, const ActionSpace& space) {
    if (static_cast<int>(s.state.size()) != state_dim)
        throw std::invalid_argument("step state dimension mismatch");
    for (double v : s.state)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite state value");
    if (space.kind == ActionSpace::Kind::Discrete) {
        if (!is_discrete(s.action)) throw std::invalid_argument("expected discrete action");
        const int a = discrete_action(s.action);
        if (a < 0 || a >= space.dim) throw std::invalid_argument("discrete action out of range");
    } else {
        if (is_discrete(s.action)) throw std::invalid_argument("expected continuous action");
        const auto& v = continuous_action(s.action);
        if (static_cast<int>(v.size()) != space.dim)
            throw std::invalid_argument("continuous action dimension mismatch");
        for (double x : v)
            if (!std::isfinite(x)) throw std::invalid_argument("non-finite action value");
    }
}

inline void validate_trajectory(const Trajectory& t, int state_dim, const ActionSpace& space) {
    if (!std::isfinite(t.ret)) throw std::invalid_argument("trajectory return must be finite");
    if (t.length() < 1) throw std::invalid_argument("trajectory needs at least one unmasked step");
    for (const auto& s : t.steps) validate_step(s, state_dim, space);
}

inline void validate_dataset(const TrajectoryDataset& ds) {
    if (ds.trajectories.empty()) throw std::invalid_argument("empty dataset");
    if (ds.state_dim <= 0) throw std::invalid_argument("state_dim must be positive");
    if (ds.action_space.dim <= 0) throw std::invalid_argument("action space dim must be positive");
    for (const auto& t : ds.trajectories) validate_trajectory(t, ds.state_dim, ds.action_space);
}

// Percentile with linear interpolation between order statistics.
// `sorted` must be ascending; q in [0, 100].
inline double linear_percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile of empty list");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile out of [0, 100]");
    if (sorted.size() == 1) return sorted.front();
    const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::vector<double> sorted_returns(const TrajectoryDataset& ds) {
    std::vector<double> r;
    r.reserve(ds.trajectories.size());
    for (const auto& t : ds.trajectories) r.push_back(t.ret);
    std::sort(r.begin(), r.end());
    return r;
}

struct DatasetStats {
    std::size_t count{0};
    double ret_min{0.0};
    double ret_mean{0.0};
    double ret_max{0.0};
    double p10{0.0}, p25{0.0}, p50{0.0}, p75{0.0}, p90{0.0};
};

inline DatasetStats dataset_stats(const TrajectoryDataset& ds) {
    if (ds.trajectories.empty()) throw std::invalid_argument("dataset_stats: empty dataset");
    const auto r = sorted_returns(ds);
    DatasetStats s;
    s.count = r.size();
    s.ret_min = r.front();
    s.ret_max = r.back();
    double sum = 0.0;
    for (double v : r) sum += v;
    s.ret_mean = sum / static_cast<double>(r.size());
    s.p10 = linear_percentile(r, 10.0);
    s.p25 = linear_percentile(r, 25.0);
    s.p50 = linear_percentile(r, 50.0);
    s.p75 = linear_percentile(r, 75.0);
    s.p90 = linear_percentile(r, 90.0);
    return s;
}

// One entry of a curated multiset: a source-trajectory index plus how many
// quality bins contain it.
struct CuratedEntry {
    std::size_t index{0};
    int multiplicity{1};

    bool operator==(const CuratedEntry&) const = default;
};

struct CuratedDataset {
    std::vector<CuratedEntry> entries;  // ascending by index, unique
    std::vector<double> cutoffs;        // strictly increasing return thresholds
    std::shared_ptr<const TrajectoryDataset> source;

    std::uint64_t total_multiplicity() const {
        std::uint64_t n = 0;
        for (const auto& e : entries) n += static_cast<std::uint64_t>(e.multiplicity);
        return n;
    }
};

// Checks that stored multiplicities agree with the cutoff construction:
// multiplicity(tau) == |{i : ret(tau) > c_i}|.
inline void validate_curated(const CuratedDataset& cd) {
    if (!cd.source) throw std::invalid_argument("curated dataset lacks a source");
    if (cd.entries.empty()) throw std::invalid_argument("empty curated set");
    if (cd.cutoffs.empty()) throw std::invalid_argument("curated dataset lacks cutoffs");
    for (std::size_t i = 1; i < cd.cutoffs.size(); ++i)
        if (!(cd.cutoffs[i - 1] < cd.cutoffs[i]))
            throw std::invalid_argument("cutoffs must be strictly increasing");
    const auto& trajs = cd.source->trajectories;
    std::size_t prev = 0;
    bool first = true;
    for (const auto& e : cd.entries) {
        if (!first && e.index <= prev) throw std::invalid_argument("curated entries out of order");
        first = false;
        prev = e.index;
        if (e.index >= trajs.size()) throw std::invalid_argument("curated entry index out of range");
        int m = 0;
        for (double c : cd.cutoffs) m += trajs[e.index].ret > c ? 1 : 0;
        if (m != e.multiplicity) throw std::invalid_argument("curated multiplicity inconsistent with cutoffs");
        if (e.multiplicity < 1) throw std::invalid_argument("curated multiplicity must be >= 1");
    }
}

}  // namespace iwsft
