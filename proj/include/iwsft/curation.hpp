// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "iwsft/rng.hpp"
#include "iwsft/types.hpp"

namespace iwsft {

// Keep every trajectory with ret strictly above `threshold`, multiplicity 1.
inline CuratedDataset filter_binary(std::shared_ptr<const TrajectoryDataset> ds, double threshold) {
    if (!ds || ds->trajectories.empty()) throw std::invalid_argument("filter_binary: empty dataset");
    CuratedDataset cd;
    cd.source = std::move(ds);
    cd.cutoffs = {threshold};
    for (std::size_t i = 0; i < cd.source->trajectories.size(); ++i)
        if (cd.source->trajectories[i].ret > threshold) cd.entries.push_back({i, 1});
    if (cd.entries.empty()) throw std::runtime_error("empty curated set");
    return cd;
}

// Every trajectory with multiplicity 1; the degenerate curation used for
// behavior cloning on the full dataset.
inline CuratedDataset curate_all(std::shared_ptr<const TrajectoryDataset> ds) {
    return filter_binary(std::move(ds), -std::numeric_limits<double>::infinity());
}

// Overlapping quality bins: for each percentile cutoff c_i compute the return
// threshold a_i, keep trajectories with ret > a_i, and count bin memberships
// as multiplicities. Bins are nested, so multiplicity equals the number of
// thresholds a trajectory strictly exceeds.
inline CuratedDataset curate_quality(std::shared_ptr<const TrajectoryDataset> ds,
                                     const std::vector<double>& percentile_cutoffs) {
    if (!ds || ds->trajectories.empty()) throw std::invalid_argument("curate_quality: empty dataset");
    if (percentile_cutoffs.empty()) throw std::invalid_argument("curate_quality: no cutoffs");
    for (std::size_t i = 0; i < percentile_cutoffs.size(); ++i) {
        const double c = percentile_cutoffs[i];
        if (!(c > 0.0 && c <= 100.0))
            throw std::invalid_argument("percentile cutoffs must lie in (0, 100]");
        if (i > 0 && !(percentile_cutoffs[i - 1] < c))
            throw std::invalid_argument("percentile cutoffs must be strictly increasing");
    }

    const auto sorted = sorted_returns(*ds);
    std::vector<double> thresholds;
    thresholds.reserve(percentile_cutoffs.size());
    for (double c : percentile_cutoffs) thresholds.push_back(linear_percentile(sorted, c));
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (!(thresholds[i - 1] < thresholds[i]))
            throw std::runtime_error("degenerate percentile thresholds (tied returns)");

    CuratedDataset cd;
    cd.source = std::move(ds);
    cd.cutoffs = thresholds;
    bool top_nonempty = false;
    for (std::size_t i = 0; i < cd.source->trajectories.size(); ++i) {
        const double r = cd.source->trajectories[i].ret;
        int m = 0;
        for (double a : thresholds) m += r > a ? 1 : 0;
        if (m > 0) cd.entries.push_back({i, m});
        if (r > thresholds.back()) top_nonempty = true;
    }
    if (!top_nonempty) throw std::runtime_error("empty curated set (top quality bin)");
    return cd;
}

// Per-bin sizes (count of ret > a_i for each stored threshold).
inline std::vector<std::size_t> bin_sizes(const CuratedDataset& cd) {
    std::vector<std::size_t> sizes(cd.cutoffs.size(), 0);
    for (const auto& e : cd.entries)
        for (std::size_t i = 0; i < cd.cutoffs.size(); ++i)
            if (cd.source->trajectories[e.index].ret > cd.cutoffs[i]) ++sizes[i];
    return sizes;
}

// Multiplicity-proportional i.i.d. draws with replacement. The generator is
// carried by the caller so batch streams stay deterministic.
inline std::vector<std::size_t> sample_indices(const CuratedDataset& cd, std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("sample_indices: batch_size must be >= 1");
    if (cd.entries.empty()) throw std::invalid_argument("sample_indices: empty curated set");
    std::vector<std::uint64_t> cum;
    cum.reserve(cd.entries.size());
    std::uint64_t total = 0;
    for (const auto& e : cd.entries) {
        total += static_cast<std::uint64_t>(e.multiplicity);
        cum.push_back(total);
    }
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto u = static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(total));
        const auto it = std::upper_bound(cum.begin(), cum.end(), std::min(u, total - 1));
        out.push_back(cd.entries[static_cast<std::size_t>(it - cum.begin())].index);
    }
    return out;
}

inline std::vector<Trajectory> sample_batch(const CuratedDataset& cd, std::size_t batch_size,
                                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Trajectory> out;
    out.reserve(batch_size);
    for (std::size_t idx : sample_indices(cd, batch_size, rng))
        out.push_back(cd.source->trajectories[idx]);
    return out;
}

}  // namespace iwsft
