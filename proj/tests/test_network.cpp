#include <doctest.h>

#include <algorithm>

#include "gasim/network.hpp"

using namespace gasim;

TEST_CASE("generated networks hit the degree floor and the calibrated mean") {
    const SocialGraph g = generate_network(2000, Rng(3));
    long long total = 0;
    int min_in = 1 << 30;
    for (int v = 0; v < 2000; ++v) {
        total += g.in_degree(v);
        min_in = std::min(min_in, g.in_degree(v));
    }
    CHECK(min_in >= 10);
    const double mean = static_cast<double>(total) / 2000.0;
    CHECK(mean >= 15.0);
    CHECK(mean <= 25.0);
}

TEST_CASE("the in-degree distribution is heavy-tailed across seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int n = 3000;
        const SocialGraph g = generate_network(n, Rng(seed));
        std::vector<int> degrees(n);
        for (int v = 0; v < n; ++v) degrees[v] = g.in_degree(v);
        std::sort(degrees.begin(), degrees.end());
        const double p50 = degrees[n / 2];
        const double p99 = degrees[static_cast<int>(0.99 * n)];
        CHECK(p99 / p50 >= 3.0);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    const SocialGraph a = generate_network(500, Rng(9));
    const SocialGraph b = generate_network(500, Rng(9));
    REQUIRE(a.follow_edges().size() == b.follow_edges().size());
    for (std::size_t i = 0; i < a.follow_edges().size(); ++i) {
        CHECK(a.follow_edges()[i].follower == b.follow_edges()[i].follower);
        CHECK(a.follow_edges()[i].followee == b.follow_edges()[i].followee);
    }
    const SocialGraph c = generate_network(500, Rng(10));
    CHECK(a.follow_edges().size() != c.follow_edges().size());
}

TEST_CASE("interaction edges carry weight 1 and populations below 11 are refused") {
    const SocialGraph g = generate_network(60, Rng(1));
    for (const auto& e : g.interaction_edges()) CHECK(e.weight == 1.0);
    CHECK_THROWS_AS(generate_network(10, Rng(1)), Error);
}
