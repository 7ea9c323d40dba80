#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "gasim/gom.hpp"
#include "test_helpers.hpp"

using namespace gasim;
using gasim::testing::dense_l_plus_delta;
using gasim::testing::random_memory_graph;
using gasim::testing::random_unit;

namespace {

MemoryNode make_node(int id, double opinion, Vector content, int dim = -1) {
    MemoryNode n;
    n.node_id = id;
    n.content = "node " + std::to_string(id);
    n.content_embedding = std::move(content);
    n.keyword_embedding = Vector::Zero(dim < 0 ? n.content_embedding.size() : dim);
    n.opinion = opinion;
    return n;
}

RetrievalConfig default_config() {
    RetrievalConfig c;
    c.validate();
    return c;
}

}  // namespace

TEST_CASE("insert links by content cosine with the published edge weight") {
    // Empty graph: first node has no candidates.
    MemoryGraph g(2, 3);
    g.insert(make_node(0, 1.0, Vector::Unit(2, 0)));
    CHECK(g.size() == 1);
    CHECK(g.edges(0).empty());

    // Identical unit embeddings and opinions 1: w = 1.
    g.insert(make_node(1, 1.0, Vector::Unit(2, 0)));
    REQUIRE(g.edges(0).size() == 1);
    CHECK(g.edges(0)[0].second == doctest::Approx(1.0).epsilon(1e-15));

    // cos = 0.5 and opinions 0.5, -0.8: w = -0.2.
    Vector tilted(2);
    tilted << 0.5, std::sqrt(3.0) / 2.0;
    MemoryGraph h(2, 1);
    h.insert(make_node(0, 0.5, Vector::Unit(2, 0)));
    h.insert(make_node(1, -0.8, tilted));
    REQUIRE(h.edges(1).size() == 1);
    CHECK(h.edges(1)[0].second == doctest::Approx(-0.2).epsilon(1e-12));

    CHECK_THROWS_AS(h.insert(make_node(1, 0.0, Vector::Unit(2, 0))), Error);
}

TEST_CASE("zero opinions make structural zeros, not stored edges") {
    MemoryGraph g(2, 5);
    g.insert(make_node(0, 0.0, Vector::Unit(2, 0)));
    g.insert(make_node(1, 1.0, Vector::Unit(2, 0)));
    g.insert(make_node(2, 0.9, Vector::Unit(2, 0)));
    CHECK(g.edges(0).empty());  // all its products are exactly zero
    CHECK(g.edges(1).size() == 1);
    CHECK(g.edges(2).size() == 1);
}

TEST_CASE("adjacency stays exactly symmetric through random insert sequences") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Rng g_rng = rng.derive(trial);
        const MemoryGraph g = random_memory_graph(g_rng, 40, 4);
        std::size_t directed = 0;
        for (int i = 0; i < g.size(); ++i) {
            for (const auto& [j, w] : g.edges(i)) {
                ++directed;
                CHECK(std::abs(w) <= 1.0 + 1e-12);
                CHECK(i != j);  // zero diagonal
                bool found = false;
                for (const auto& [k, w2] : g.edges(j)) {
                    if (k == i) {
                        CHECK(w2 == w);  // exact, not approximate
                        found = true;
                    }
                }
                CHECK(found);
            }
        }
        CHECK(directed == 2 * g.edge_count());
        // Append-only kNN: at most k new edges per insert.
        CHECK(g.edge_count() <= static_cast<std::size_t>(4 * g.size()));
    }
}

TEST_CASE("initial relevance blends cosine and thresholded keyword hit") {
    const int dim = 4;
    MemoryGraph g(dim, 3);
    MemoryNode n0 = make_node(0, 1.0, Vector::Unit(dim, 0));
    const Vector q = Vector::Unit(dim, 0);

    auto keyword_at_cos = [&](double c) {
        Vector k(dim);
        k << c, std::sqrt(1.0 - c * c), 0.0, 0.0;
        return k;
    };

    // cos(q, m) = 1 and keyword cosine 0.95 >= tau: f0 = 1.
    n0.keyword_embedding = keyword_at_cos(0.95);
    g.insert(n0);
    CHECK(initial_relevance(g, q, 0.9)(0) == doctest::Approx(1.0).epsilon(1e-12));

    // Orthogonal content, keyword cosine 0.1: both terms vanish.
    MemoryGraph g2(dim, 3);
    MemoryNode n1 = make_node(0, 1.0, Vector::Unit(dim, 1));
    n1.keyword_embedding = keyword_at_cos(0.1);
    g2.insert(n1);
    CHECK(initial_relevance(g2, q, 0.9)(0) == doctest::Approx(0.0).epsilon(1e-12));

    // Threshold just missed: f0 = 0.5.
    MemoryGraph g3(dim, 3);
    MemoryNode n2 = make_node(0, 1.0, Vector::Unit(dim, 0));
    n2.keyword_embedding = keyword_at_cos(0.89);
    g3.insert(n2);
    CHECK(initial_relevance(g3, q, 0.9)(0) == doctest::Approx(0.5).epsilon(1e-12));

    Vector wrong_dim(dim + 1);
    CHECK_THROWS_AS(initial_relevance(g3, wrong_dim, 0.9), Error);
}

TEST_CASE("raising tau never increases any relevance entry") {
    Rng rng(33);
    const MemoryGraph g = random_memory_graph(rng, 30, 4);
    const Vector q = random_unit(rng, g.embed_dim());
    double taus[] = {0.0, 0.3, 0.6, 0.9, 0.99};
    for (std::size_t i = 1; i < std::size(taus); ++i) {
        const Vector lo = initial_relevance(g, q, taus[i - 1]);
        const Vector hi = initial_relevance(g, q, taus[i]);
        for (int j = 0; j < g.size(); ++j) CHECK(hi(j) <= lo(j) + 1e-15);
    }
}

TEST_CASE("corrected laplacian: positive weights leave the correction at zero") {
    MemoryGraph g(2, 3);
    g.insert(make_node(0, 1.0, Vector::Unit(2, 0)));
    g.insert(make_node(1, 0.5, Vector::Unit(2, 0)));  // w = 0.5 > 0
    const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);
    // Delta = 0 exactly: diagonal is 1, off-diagonal -w / sqrt(d_i d_j) = -1.
    CHECK(Matrix(lap)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(Matrix(lap)(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(corrected_laplacian(MemoryGraph(2, 3), 1.0, 1e-6), Error);
}

TEST_CASE("corrected laplacian: single negative edge gives Delta_ii = 1") {
    // Two antipodal opinions, identical embeddings: w = 1 * (-0.5) * 1 = -0.5.
    MemoryGraph g(2, 3);
    g.insert(make_node(0, 1.0, Vector::Unit(2, 0)));
    g.insert(make_node(1, -0.5, Vector::Unit(2, 0)));
    REQUIRE(g.edges(0).size() == 1);
    CHECK(g.edges(0)[0].second == doctest::Approx(-0.5).epsilon(1e-12));
    for (int i = 0; i < 2; ++i) {
        const double delta = 1.0 * (g.abs_degree(i) - g.degree(i));
        CHECK(delta == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gershgorin bound: L + Delta is positive semidefinite") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        Rng g_rng = rng.derive(trial);
        const MemoryGraph g = random_memory_graph(g_rng, 20, 3);
        const Matrix m = dense_l_plus_delta(g, 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("closed form solves the first-order condition") {
    Rng rng(77);
    const MemoryGraph g = random_memory_graph(rng, 5, 2);
    const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);

    // Linearity: f0 = 0 gives f* = 0.
    CHECK(solve_closed_form(lap, Vector::Zero(5), 0.5, 0.5, 0.5).norm() == 0.0);

    // Independent oracle: LU factorization plus iterative refinement.
    const Vector f0 = initial_relevance(g, random_unit(rng, g.embed_dim()), 0.9);
    const Vector f = solve_closed_form(lap, f0, 0.5, 0.5, 0.5);
    Matrix system = Matrix(lap) * 0.5;
    system.diagonal().array() += 1.0;
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector oracle = lu.solve(0.5 * f0);
    for (int pass = 0; pass < 3; ++pass) oracle += lu.solve(0.5 * f0 - system * oracle);
    CHECK((f - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("isolated node: system reduces to the regularized scalar") {
    MemoryGraph g(2, 3);
    g.insert(make_node(0, 0.7, Vector::Unit(2, 0)));
    const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);
    CHECK(Matrix(lap)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    Vector f0(1);
    f0 << 0.8;
    const Vector f = solve_closed_form(lap, f0, 0.5, 0.5, 0.5);
    // f* = 0.5 f0 / (1 + 0.5 * 1) = f0 / 3.
    CHECK(f(0) == doctest::Approx(0.8 / 3.0).epsilon(1e-12));
}

TEST_CASE("closed form refuses oversized systems") {
    SparseMatrix big(2001, 2001);
    big.setIdentity();
    CHECK_THROWS_AS(solve_closed_form(big, Vector::Zero(2001), 0.5, 0.5, 0.5), Error);
}

TEST_CASE("propagation identities at lambda = (0.5, 0.5, 0.5)") {
    RetrievalConfig c = default_config();
    CHECK(c.mu() == 0.5);  // bit-exact
    Rng rng(5);
    Vector f0(6);
    for (int i = 0; i < 6; ++i) f0(i) = rng.uniform(-1.0, 1.0);
    const Vector anchor = propagation_anchor(f0, c);
    for (int i = 0; i < 6; ++i) CHECK(anchor(i) == f0(i));  // f0' = f0 exactly

    // Zero matrix: fixed point is (1 - mu) f0' = f0 / 2, reached in one step.
    SparseMatrix zero(6, 6);
    const PropagationResult r = propagate_retrieval(zero, f0, c);
    CHECK(r.converged);
    for (int i = 0; i < 6; ++i) CHECK(r.scores(i) == doctest::Approx(0.5 * f0(i)).epsilon(1e-15));
    // The same point solves the closed form, as it must.
    const Vector f_star = solve_closed_form(zero, f0, 0.5, 0.5, 0.5);
    CHECK((r.scores - f_star).lpNorm<Eigen::Infinity>() <= 1e-12);

    RetrievalConfig degenerate = c;
    degenerate.lambda1 = 0.25;
    degenerate.lambda2 = 0.75;
    degenerate.lambda3 = 0.5;  // 2*0.25 + 0.5 - 1 = 0
    CHECK_THROWS_AS(propagation_anchor(f0, degenerate), Error);
}

TEST_CASE("propagation matches the closed form on converging instances") {
    Rng rng(2024);
    int converged_count = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Rng g_rng = rng.derive(trial);
        const int n = 5 + static_cast<int>(g_rng.uniform_int(46));
        const int k = 1 + static_cast<int>(g_rng.uniform_int(5));
        const MemoryGraph g = random_memory_graph(g_rng, n, k);
        const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);
        const Vector f0 = initial_relevance(g, random_unit(g_rng, g.embed_dim()), 0.9);

        RetrievalConfig c = default_config();
        c.max_iters = 500;
        c.residual_tol = 1e-10;
        const PropagationResult r = propagate_retrieval(lap, f0, c);
        if (!r.converged) continue;
        ++converged_count;
        const Vector f_star = solve_closed_form(lap, f0, c.lambda1, c.lambda2, c.lambda3);
        CHECK((r.scores - f_star).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
    CHECK(converged_count > 0);
}

TEST_CASE("divergence is detected and the fallback answers instead") {
    // Tiny signed graph with a negative degree sum: the regularized
    // normalization blows the spectral radius far past 1.
    MemoryGraph g(2, 3);
    g.insert(make_node(0, 1.0, Vector::Unit(2, 0)));
    g.insert(make_node(1, -0.5, Vector::Unit(2, 0)));
    const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);
    Vector f0(2);
    f0 << 0.8, 0.3;

    const PropagationResult r = propagate_retrieval(lap, f0, default_config());
    CHECK(r.diverged);
    CHECK_FALSE(r.converged);

    const RetrievalResult full = retrieve(g, Vector::Unit(2, 0), default_config());
    CHECK(full.solver == RetrievalSolver::kClosedFormFallback);
    // The fallback satisfies the first-order condition.
    const Vector f0_full = initial_relevance(g, Vector::Unit(2, 0), 0.9);
    Matrix system = Matrix(lap) * 0.5;
    system.diagonal().array() += 1.0;
    CHECK((system * full.scores - 0.5 * f0_full).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("retrieval composition and top-R selection") {
    RetrievalConfig c = default_config();

    // Empty graph: empty result.
    MemoryGraph empty(3, 2);
    const RetrievalResult none = retrieve(empty, Vector::Unit(3, 0), c);
    CHECK(none.selected.empty());
    CHECK(none.scores.size() == 0);

    // Single node with positive relevance is selected.
    MemoryGraph one(3, 2);
    one.insert(make_node(7, 0.9, Vector::Unit(3, 0), 3));
    c.top_r = 1;
    const RetrievalResult single = retrieve(one, Vector::Unit(3, 0), c);
    REQUIRE(single.selected.size() == 1);
    CHECK(single.selected[0] == 7);

    // R larger than the node count is capped.
    c.top_r = 10;
    CHECK(retrieve(one, Vector::Unit(3, 0), c).selected.size() == 1);
}

TEST_CASE("two opposed clusters: an aligned query retrieves only its own") {
    // Cluster A around e0 with opinion +1, cluster B around e1 with -1.
    // Cross-cluster cosines are mildly positive, so cross edges are negative.
    const int dim = 3;
    Rng rng(11);
    MemoryGraph g(dim, 4);
    auto blob = [&](const Vector& center, double spread) {
        Vector v = center + spread * random_unit(rng, dim);
        return Vector(v / v.norm());
    };
    const Vector e0 = Vector::Unit(dim, 0);
    const Vector e1 = (Vector::Unit(dim, 0) + 2.0 * Vector::Unit(dim, 1)).normalized();
    int id = 0;
    for (int i = 0; i < 5; ++i) g.insert(make_node(id++, 1.0, blob(e0, 0.15)));
    for (int i = 0; i < 5; ++i) g.insert(make_node(id++, -1.0, blob(e1, 0.15)));

    RetrievalConfig c = default_config();
    c.top_r = 3;
    const RetrievalResult r = retrieve(g, e0, c);
    REQUIRE(r.selected.size() == 3);
    for (int node : r.selected) CHECK(node < 5);

    // Exhaustive oracle: the closed form ranks every cluster-A node above
    // every cluster-B node for this query.
    const Vector f0 = initial_relevance(g, e0, c.tau);
    const SparseMatrix lap = corrected_laplacian(g, c.nu, c.degree_epsilon);
    const Vector f_star = solve_closed_form(lap, f0, c.lambda1, c.lambda2, c.lambda3);
    double min_a = 1e9, max_b = -1e9;
    for (int i = 0; i < 5; ++i) min_a = std::min(min_a, f_star(i));
    for (int i = 5; i < 10; ++i) max_b = std::max(max_b, f_star(i));
    CHECK(min_a > max_b);
}

TEST_CASE("the optimizer's answer never scores worse than the anchor") {
    Rng rng(410);
    for (int trial = 0; trial < 10; ++trial) {
        Rng g_rng = rng.derive(trial);
        const MemoryGraph g = random_memory_graph(g_rng, 25, 4);
        const SparseMatrix lap = corrected_laplacian(g, 1.0, 1e-6);
        const Vector f0 = initial_relevance(g, random_unit(g_rng, g.embed_dim()), 0.9);
        const Vector f_star = solve_closed_form(lap, f0, 0.5, 0.5, 0.5);
        const double at_star = corrected_objective(lap, f0, 0.5, 0.5, 0.5, f_star);
        const double at_anchor = corrected_objective(lap, f0, 0.5, 0.5, 0.5, f0);
        CHECK(at_star <= at_anchor + 1e-12);
    }
}
