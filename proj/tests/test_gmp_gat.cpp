#include <doctest.h>

#include <cmath>

#include "gasim/gmp.hpp"
#include "test_helpers.hpp"

using namespace gasim;
using namespace gasim::testing;

namespace {

/// Independent dense reference for the whole attention stack: adjacency
/// masks, per-edge loops, no shared code with the library implementation.
Vector dense_reference_forward(const Matrix& x, const GatGraph& graph,
                               const GmpParams& params) {
    const int n = graph.n;
    Matrix h = x;  // n x f, rows are nodes
    for (std::size_t l = 0; l < params.gat.size(); ++l) {
        const auto& layer = params.gat[l];
        const int hd = layer.head_dim();
        Matrix next(n, layer.out_dim());
        for (std::size_t head = 0; head < layer.heads.size(); ++head) {
            const auto& p = layer.heads[head];
            Matrix g(n, hd);
            for (int i = 0; i < n; ++i) g.row(i) = (p.weight * h.row(i).transpose()).transpose();
            for (int i = 0; i < n; ++i) {
                std::vector<double> logits;
                std::vector<int> sources;
                for (int s = graph.offsets[i]; s < graph.offsets[i + 1]; ++s) {
                    const int j = graph.src[s];
                    const Vector edge_feat = p.edge_map * graph.weight[s];
                    double raw = p.attn_dst.dot(g.row(i)) + p.attn_src.dot(g.row(j)) +
                                 p.attn_edge.dot(edge_feat);
                    raw = raw > 0 ? raw : 0.2 * raw;
                    logits.push_back(raw);
                    sources.push_back(j);
                }
                double mx = logits[0];
                for (double v : logits) mx = std::max(mx, v);
                double denom = 0;
                for (double& v : logits) {
                    v = std::exp(v - mx);
                    denom += v;
                }
                Vector agg = Vector::Zero(hd);
                for (std::size_t s = 0; s < logits.size(); ++s)
                    agg += (logits[s] / denom) * g.row(sources[s]).transpose();
                next.row(i).segment(head * hd, hd) = agg.transpose();
            }
        }
        next.rowwise() += layer.bias.transpose();
        const bool last = l + 1 == params.gat.size();
        h = last ? next : next.cwiseMax(0.0).eval();
    }
    return h.col(0).array().tanh();
}

}  // namespace

TEST_CASE("projection: zero weights broadcast the biases") {
    Rng rng(8);
    GmpParams p = GmpParams::init(6, 2, rng);
    p.dyn_mlp.w1.setZero();
    p.dyn_mlp.w2.setZero();
    p.dyn_mlp.b1.setZero();
    p.static_mlp.w1.setZero();
    p.static_mlp.w2.setZero();
    p.static_mlp.b1.setZero();
    for (int i = 0; i < 64; ++i) {
        p.dyn_mlp.b2(i) = 0.01 * i;
        p.static_mlp.b2(i) = -0.02 * i;
    }
    const Matrix phi_d = random_history(rng, 4, 9);
    const Matrix phi_s = random_history(rng, 4, 6);
    const Matrix x = project_features(phi_d, phi_s, p);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 64; ++j) {
            CHECK(x(i, j) == doctest::Approx(0.01 * j));
            CHECK(x(i, 64 + j) == doctest::Approx(-0.02 * j));
        }
}

TEST_CASE("projection: identity-shaped weights pass non-negative features through") {
    Rng rng(9);
    GmpParams p = GmpParams::init(6, 2, rng);
    p.dyn_mlp.w1.setZero();
    for (int i = 0; i < 9; ++i) p.dyn_mlp.w1(i, i) = 1.0;
    p.dyn_mlp.b1.setZero();
    p.dyn_mlp.w2.setIdentity();
    p.dyn_mlp.b2.setZero();
    Matrix phi_d = random_history(rng, 5, 9).cwiseAbs();  // non-negative
    const Matrix x_d = mlp_forward(phi_d, p.dyn_mlp);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 9; ++j) CHECK(x_d(i, j) == doctest::Approx(phi_d(i, j)));
        for (int j = 9; j < 64; ++j) CHECK(x_d(i, j) == doctest::Approx(0.0));
    }
}

TEST_CASE("projection matches an unbatched per-agent oracle") {
    Rng rng(10);
    const GmpParams p = GmpParams::init(7, 2, rng);
    const Matrix phi_d = random_history(rng, 6, 9);
    const Matrix phi_s = random_history(rng, 6, 7);
    const Matrix x = project_features(phi_d, phi_s, p);
    for (int i = 0; i < 6; ++i) {
        const Vector hd = (p.dyn_mlp.w1 * phi_d.row(i).transpose() + p.dyn_mlp.b1).cwiseMax(0.0);
        const Vector xd = p.dyn_mlp.w2 * hd + p.dyn_mlp.b2;
        const Vector hs =
            (p.static_mlp.w1 * phi_s.row(i).transpose() + p.static_mlp.b1).cwiseMax(0.0);
        const Vector xs = p.static_mlp.w2 * hs + p.static_mlp.b2;
        for (int j = 0; j < 64; ++j) {
            CHECK(std::abs(x(i, j) - xd(j)) <= 1e-12);
            CHECK(std::abs(x(i, 64 + j) - xs(j)) <= 1e-12);
        }
    }
}

TEST_CASE("single node: the self-loop takes all attention") {
    Rng rng(11);
    const GmpParams p = GmpParams::init(4, 2, rng);
    const GatGraph g = GatGraph::from_edges(1, {});
    Matrix x = random_history(rng, 1, 128);
    std::vector<GatLayerCache> cache;
    const Vector out = gat_forward(x, g, p, &cache);
    CHECK(out.size() == 1);
    for (const auto& layer : cache)
        for (const auto& alpha : layer.alpha) CHECK(alpha(0) == doctest::Approx(1.0));
}

TEST_CASE("outputs live strictly inside (-1, 1) and attention normalizes") {
    Rng rng(13);
    const SocialGraph social = random_social_graph(rng, 12, 0.3);
    const GatGraph g = GatGraph::from_social(social);
    const GmpParams p = GmpParams::init(4, 2, rng);
    Matrix x = 5.0 * random_history(rng, 12, 128);  // exaggerated inputs
    std::vector<GatLayerCache> cache;
    const Vector out = gat_forward(x, g, p, &cache);
    for (int i = 0; i < 12; ++i) {
        CHECK(out(i) > -1.0);
        CHECK(out(i) < 1.0);
    }
    for (const auto& layer : cache) {
        for (const auto& alpha : layer.alpha) {
            for (int i = 0; i < g.n; ++i) {
                double sum = 0;
                for (int s = g.offsets[i]; s < g.offsets[i + 1]; ++s) sum += alpha(s);
                CHECK(std::abs(sum - 1.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("forward matches an independently coded dense reference") {
    Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        Rng t_rng = rng.derive(trial);
        const SocialGraph social = random_social_graph(t_rng, 8, 0.4);
        const GatGraph g = GatGraph::from_social(social);
        const GmpParams p = GmpParams::init(4, 2, t_rng.derive(1));
        const Matrix x = random_history(t_rng, 8, 128);
        const Vector got = gat_forward(x, g, p);
        const Vector want = dense_reference_forward(x, g, p);
        CHECK((got - want).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("relabeling nodes and edges permutes the output exactly") {
    Rng rng(15);
    const int n = 9;
    std::vector<InteractionEdge> edges;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rng.uniform() < 0.35) edges.push_back({a, b, rng.uniform(0.1, 1.0)});
    const GmpParams p = GmpParams::init(4, 2, rng.derive(1));
    const Matrix x = random_history(rng, n, 128);
    const Vector base = gat_forward(x, GatGraph::from_edges(n, edges), p);

    // Apply a permutation to node ids, keeping the edge list order.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = (i * 4 + 2) % n;  // 4 coprime with 9
    std::vector<InteractionEdge> relabeled;
    for (const auto& e : edges) relabeled.push_back({perm[e.a], perm[e.b], e.weight});
    Matrix x_perm(n, 128);
    for (int i = 0; i < n; ++i) x_perm.row(perm[i]) = x.row(i);
    const Vector permuted = gat_forward(x_perm, GatGraph::from_edges(n, relabeled), p);

    for (int i = 0; i < n; ++i) CHECK(permuted(perm[i]) == base(i));  // bitwise
}

TEST_CASE("configurable stack depth keeps the contract") {
    Rng rng(16);
    for (int depth : {1, 3}) {
        const GmpParams p = GmpParams::init(4, depth, rng.derive(depth));
        CHECK(p.depth() == depth);
        const SocialGraph social = random_social_graph(rng, 6, 0.5);
        Matrix x = random_history(rng, 6, 128);
        const Vector out = gat_forward(x, GatGraph::from_social(social), p);
        for (int i = 0; i < 6; ++i) {
            CHECK(out(i) > -1.0);
            CHECK(out(i) < 1.0);
        }
    }
}

TEST_CASE("default parameter shapes match the architecture table") {
    Rng rng(17);
    const GmpParams p = GmpParams::init(768, 2, rng);
    CHECK(p.dyn_mlp.w1.rows() == 64);
    CHECK(p.dyn_mlp.w1.cols() == 9);
    CHECK(p.static_mlp.w1.cols() == 768);
    CHECK(p.static_mlp.w2.rows() == 64);
    REQUIRE(p.gat.size() == 2);
    CHECK(p.gat[0].heads.size() == 4);
    CHECK(p.gat[0].heads[0].weight.rows() == 8);
    CHECK(p.gat[0].heads[0].weight.cols() == 128);
    CHECK(p.gat[0].heads[0].edge_map.size() == 8);  // edge dim 1 -> 8
    CHECK(p.gat[0].heads[0].attn_dst.size() == 8);
    CHECK(p.gat[1].heads.size() == 1);
    CHECK(p.gat[1].heads[0].weight.rows() == 1);
    CHECK(p.gat[1].heads[0].weight.cols() == 32);
    CHECK(p.gat[1].heads[0].edge_map.size() == 1);  // edge dim 1 -> 1
}
