#include "gasim/types.hpp"

#include <numeric>
#include <set>
#include <utility>

namespace gasim {

SocialGraph::SocialGraph(int n_agents, std::vector<FollowEdge> follow_edges,
                         std::vector<InteractionEdge> interaction_edges)
    : n_agents_(n_agents),
      follow_edges_(std::move(follow_edges)),
      interaction_edges_(std::move(interaction_edges)) {
    if (n_agents_ <= 0) throw Error("SocialGraph: n_agents must be positive");
    for (const auto& e : follow_edges_) {
        if (e.follower < 0 || e.follower >= n_agents_ || e.followee < 0 || e.followee >= n_agents_)
            throw Error("SocialGraph: follow edge endpoint out of range");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& e : interaction_edges_) {
        if (e.a < 0 || e.a >= n_agents_ || e.b < 0 || e.b >= n_agents_)
            throw Error("SocialGraph: interaction edge endpoint out of range");
        if (e.a == e.b) throw Error("SocialGraph: self-loop in interaction edges");
        auto key = std::minmax(e.a, e.b);
        if (!seen.insert(key).second)
            throw Error("SocialGraph: duplicate interaction edge");
    }
    build_adjacency();
}

SocialGraph SocialGraph::from_follow_edges(int n_agents, std::vector<FollowEdge> follow_edges) {
    std::set<std::pair<int, int>> pairs;
    for (const auto& e : follow_edges) {
        if (e.follower == e.followee) continue;
        pairs.insert(std::minmax(e.follower, e.followee));
    }
    std::vector<InteractionEdge> interaction;
    interaction.reserve(pairs.size());
    for (const auto& [a, b] : pairs) interaction.push_back({a, b, 1.0});
    return SocialGraph(n_agents, std::move(follow_edges), std::move(interaction));
}

void SocialGraph::build_adjacency() {
    std::vector<int> counts(n_agents_, 0);
    for (const auto& e : interaction_edges_) {
        ++counts[e.a];
        ++counts[e.b];
    }
    adj_offsets_.assign(n_agents_ + 1, 0);
    std::partial_sum(counts.begin(), counts.end(), adj_offsets_.begin() + 1);
    adj_ids_.resize(adj_offsets_.back());
    adj_w_.resize(adj_offsets_.back());

    std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
    for (const auto& e : interaction_edges_) {
        adj_ids_[cursor[e.a]] = e.b;
        adj_w_[cursor[e.a]++] = e.weight;
        adj_ids_[cursor[e.b]] = e.a;
        adj_w_[cursor[e.b]++] = e.weight;
    }
    // Neighbors in ascending id order; weights follow their neighbor.
    for (int v = 0; v < n_agents_; ++v) {
        const int lo = adj_offsets_[v], hi = adj_offsets_[v + 1];
        std::vector<std::pair<int, double>> row;
        row.reserve(hi - lo);
        for (int k = lo; k < hi; ++k) row.emplace_back(adj_ids_[k], adj_w_[k]);
        std::sort(row.begin(), row.end());
        for (int k = lo; k < hi; ++k) {
            adj_ids_[k] = row[k - lo].first;
            adj_w_[k] = row[k - lo].second;
        }
    }

    max_degree_ = 0;
    for (int v = 0; v < n_agents_; ++v) max_degree_ = std::max(max_degree_, degree(v));

    in_degree_.assign(n_agents_, 0);
    for (const auto& e : follow_edges_) ++in_degree_[e.followee];
}

}  // namespace gasim
