#include "gasim/edg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gasim/parallel.hpp"

namespace gasim {

namespace {

int bin_index(double opinion, int bins) {
    // Equal-width bins over [-1, 1]; the last bin is closed on the right so
    // +1.0 lands in bin bins-1.
    const double scaled = (opinion + 1.0) * 0.5 * bins;
    int idx = static_cast<int>(std::floor(scaled));
    if (idx < 0) idx = 0;
    if (idx >= bins) idx = bins - 1;
    return idx;
}

}  // namespace

Vector neighborhood_entropy(const OpinionState& state, const SocialGraph& graph,
                            int bins, int window) {
    if (state.step() < 1)
        throw Error("neighborhood_entropy: state has no committed steps");
    if (bins < 2) throw Error("neighborhood_entropy: bins must be >= 2");
    if (window < 1) throw Error("neighborhood_entropy: window must be >= 1");

    const int n = state.n_agents();
    const Matrix& history = state.history();
    const int t = state.step();
    const int span = std::min(window, t);
    const int t_begin = t - span;

    Vector entropy = Vector::Zero(n);
    parallel_for(n, [&](int i) {
        const auto nbrs = graph.neighbors(i);
        if (nbrs.empty()) return;
        std::vector<int> counts(bins, 0);
        int total = 0;
        for (int j : nbrs) {
            for (int s = t_begin; s < t; ++s) {
                ++counts[bin_index(history(j, s), bins)];
                ++total;
            }
        }
        double e = 0.0;
        for (int c : counts) {
            if (c == 0) continue;  // 0 * log 0 = 0
            const double p = static_cast<double>(c) / total;
            e -= p * std::log2(p);
        }
        entropy(i) = std::max(0.0, e);
    });
    return entropy;
}

Partition partition_agents(const Vector& entropy, int k) {
    const int n = static_cast<int>(entropy.size());
    if (k > n) throw Error("partition_agents: K exceeds population size");
    if (k < 0) throw Error("partition_agents: K must be non-negative");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Descending entropy, ties by lower agent id.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (entropy(a) != entropy(b)) return entropy(a) > entropy(b);
        return a < b;
    });

    Partition p;
    p.entropy = entropy;
    p.core_ids.assign(order.begin(), order.begin() + k);
    p.ordinary_ids.assign(order.begin() + k, order.end());
    std::sort(p.core_ids.begin(), p.core_ids.end());
    std::sort(p.ordinary_ids.begin(), p.ordinary_ids.end());
    return p;
}

}  // namespace gasim
