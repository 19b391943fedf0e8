#pragma once

#include "ccd/factors.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ccd {

struct DatasetSplit {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<std::string> stratify_on;
    double ratio = 0.7;
    std::uint64_t seed = 0;
};

/// Stratified train/test split over the full Cartesian corpus.
///
/// Samples are grouped into joint cells over the stratification factors;
/// each cell contributes floor(ratio*|cell|) train members, and the global
/// remainder is distributed one per cell in seeded order. Because every
/// non-stratified factor is uniform within a cell, per-value train shares
/// stay within a fraction of a percent of `ratio`.
inline DatasetSplit stratified_split(const FactorSpace& space,
                                     const std::vector<std::string>& stratify_on, double ratio,
                                     std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw config_error("split ratio must be in (0,1)");
    std::vector<int> strat_f;
    strat_f.reserve(stratify_on.size());
    for (const auto& name : stratify_on) strat_f.push_back(space.factor_index_of(name));

    const std::size_t n = space.size();
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> cells;
    for (std::size_t ord = 0; ord < n; ++ord) {
        const auto idx = space.ordinal_to_index(ord);
        std::vector<std::size_t> key;
        key.reserve(strat_f.size());
        for (int f : strat_f) key.push_back(idx[static_cast<std::size_t>(f)]);
        cells[key].push_back(ord);
    }

    const std::size_t train_total =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    std::size_t base_total = 0;
    std::vector<std::pair<const std::vector<std::size_t>*, std::size_t>> quota;
    quota.reserve(cells.size());
    for (const auto& [key, members] : cells) {
        const auto base = static_cast<std::size_t>(ratio * static_cast<double>(members.size()));
        quota.emplace_back(&key, base);
        base_total += base;
    }

    Rng rng(seed);
    // hand out the remaining train slots one per cell, seeded order
    std::vector<std::size_t> order(quota.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t leftover = train_total > base_total ? train_total - base_total : 0;
    for (std::size_t pos = 0; pos < order.size() && leftover > 0; ++pos) {
        auto& q = quota[order[pos]];
        const std::size_t cell_size = cells.at(*q.first).size();
        if (q.second < cell_size) {
            ++q.second;
            --leftover;
        }
    }

    DatasetSplit split;
    split.stratify_on = stratify_on;
    split.ratio = ratio;
    split.seed = seed;
    for (const auto& [key, k] : quota) {
        std::vector<std::size_t> members = cells.at(*key);
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < k ? split.train_indices : split.test_indices).push_back(members[i]);
    }
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.test_indices.begin(), split.test_indices.end());
    return split;
}

}  // namespace ccd
