#pragma once

#include <vector>

#include "gasim/types.hpp"

namespace gasim {

/// Per-step split of the population. core_ids holds the K agents with the
/// largest neighborhood entropy (ties broken by lower id), ordinary_ids the
/// complement; both are sorted ascending.
struct Partition {
    std::vector<int> core_ids;
    std::vector<int> ordinary_ids;
    Vector entropy;

    bool is_core(int agent) const {
        return std::binary_search(core_ids.begin(), core_ids.end(), agent);
    }
};

/// Shannon entropy (bits) of each agent's neighborhood opinion distribution.
///
/// For agent i the interaction-neighbor opinions over the last min(window, t)
/// committed steps are pooled into one multiset, assigned to `bins`
/// equal-width bins over [-1, 1] (last bin closed on the right), and the
/// entropy of the bin proportions is returned. Agents with no interaction
/// neighbors get entropy 0. Requires at least one committed step and
/// bins >= 2.
Vector neighborhood_entropy(const OpinionState& state, const SocialGraph& graph,
                            int bins, int window);

/// Selects the K agents with the largest entropy values as core agents.
/// Pure function of (entropy, k): re-invocation yields the same partition.
Partition partition_agents(const Vector& entropy, int k);

}  // namespace gasim
