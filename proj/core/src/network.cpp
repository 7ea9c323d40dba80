#include "gasim/network.hpp"

#include <unordered_set>

namespace gasim {

namespace {
constexpr int kFollowsPerNode = 14;
constexpr double kUniformMix = 0.5;
constexpr int kMinInDegree = 10;
}  // namespace

SocialGraph generate_network(int n_agents, Rng rng) {
    if (n_agents < kMinInDegree + 1)
        throw Error("generate_network: need at least 11 agents");

    const int seed_size = std::min(kFollowsPerNode + 1, n_agents);
    std::vector<int> in_degree(n_agents, 0);
    std::vector<std::unordered_set<int>> follows(n_agents);
    std::vector<FollowEdge> edges;
    // Every follow event appends its target here, so drawing from this list
    // is proportional to current in-degree.
    std::vector<int> attachment;

    auto add_follow = [&](int follower, int followee) {
        follows[follower].insert(followee);
        ++in_degree[followee];
        attachment.push_back(followee);
        edges.push_back({follower, followee});
    };

    for (int i = 0; i < seed_size; ++i)
        for (int j = 0; j < seed_size; ++j)
            if (i != j) add_follow(i, j);

    for (int v = seed_size; v < n_agents; ++v) {
        int picked = 0;
        while (picked < kFollowsPerNode) {
            int candidate;
            if (rng.uniform() < kUniformMix || attachment.empty()) {
                candidate = static_cast<int>(rng.uniform_int(v));
            } else {
                candidate = attachment[rng.uniform_int(attachment.size())];
            }
            if (candidate == v || follows[v].count(candidate)) continue;
            add_follow(v, candidate);
            ++picked;
        }
    }

    // Backfill: everyone ends with at least kMinInDegree followers.
    for (int v = 0; v < n_agents; ++v) {
        while (in_degree[v] < kMinInDegree) {
            const int follower = static_cast<int>(rng.uniform_int(n_agents));
            if (follower == v || follows[follower].count(v)) continue;
            add_follow(follower, v);
        }
    }

    return SocialGraph::from_follow_edges(n_agents, std::move(edges));
}

}  // namespace gasim
