#include "gasim/gom.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gasim {

namespace {
constexpr int kClosedFormLimit = 2000;
constexpr double kFirstOrderResidual = 1e-10;
}  // namespace

MemoryGraph::MemoryGraph(int embed_dim, int knn) : embed_dim_(embed_dim), knn_(knn) {
    if (embed_dim_ < 1) throw Error("MemoryGraph: embed_dim must be >= 1");
    if (knn_ < 1) throw Error("MemoryGraph: knn must be >= 1");
}

void MemoryGraph::ensure_capacity(int extra) {
    const int needed = n_ + extra;
    if (content_emb_.cols() >= needed) return;
    int cap = std::max(16, static_cast<int>(content_emb_.cols()));
    while (cap < needed) cap *= 2;
    content_emb_.conservativeResize(embed_dim_, cap);
    keyword_emb_.conservativeResize(embed_dim_, cap);
}

void MemoryGraph::link(int a, int b, double w) {
    auto insert_sorted = [](std::vector<std::pair<int, double>>& row, int idx, double w) {
        auto it = std::lower_bound(row.begin(), row.end(), idx,
                                   [](const auto& p, int v) { return p.first < v; });
        row.insert(it, {idx, w});
    };
    insert_sorted(adj_[a], b, w);
    insert_sorted(adj_[b], a, w);
    degree_[a] += w;
    degree_[b] += w;
    abs_degree_[a] += std::abs(w);
    abs_degree_[b] += std::abs(w);
    ++edge_count_;
}

void MemoryGraph::insert(const MemoryNode& node) {
    insert_batch({node});
}

void MemoryGraph::insert_batch(const std::vector<MemoryNode>& nodes) {
    if (nodes.empty()) return;
    for (const auto& node : nodes) {
        if (node.content_embedding.size() != embed_dim_ ||
            node.keyword_embedding.size() != embed_dim_)
            throw Error("MemoryGraph::insert: embedding dimension mismatch");
        const double norm = node.content_embedding.norm();
        if (norm != 0.0 && std::abs(norm - 1.0) > 1e-9)
            throw Error("MemoryGraph::insert: content embedding must be unit or zero");
    }

    const int batch = static_cast<int>(nodes.size());
    const int n0 = n_;
    ensure_capacity(batch);

    // One GEMM gives every new node its cosines against all prior nodes;
    // within-batch pairs are handled below so insertion order semantics are
    // preserved (each node only sees nodes inserted before it).
    Matrix new_emb(embed_dim_, batch);
    for (int b = 0; b < batch; ++b) new_emb.col(b) = nodes[b].content_embedding;
    Matrix sims;  // n0 x batch
    if (n0 > 0) sims.noalias() = content_emb_.leftCols(n0).transpose() * new_emb;
    Matrix batch_sims;  // batch x batch, lower triangle used
    if (batch > 1) batch_sims.noalias() = new_emb.transpose() * new_emb;

    std::vector<std::pair<double, int>> candidates;
    for (int b = 0; b < batch; ++b) {
        const MemoryNode& node = nodes[b];
        if (id_to_index_.count(node.node_id))
            throw Error("MemoryGraph::insert: duplicate node_id " + std::to_string(node.node_id));
        const int idx = n_;
        content_emb_.col(idx) = node.content_embedding;
        keyword_emb_.col(idx) = node.keyword_embedding;
        node_ids_.push_back(node.node_id);
        contents_.push_back(node.content);
        opinions_.push_back(node.opinion.value());
        steps_.push_back(node.step_created);
        adj_.emplace_back();
        degree_.push_back(0.0);
        abs_degree_.push_back(0.0);
        id_to_index_.emplace(node.node_id, idx);
        ++n_;

        candidates.clear();
        candidates.reserve(idx);
        for (int j = 0; j < n0; ++j) candidates.emplace_back(sims(j, b), j);
        for (int p = 0; p < b; ++p) candidates.emplace_back(batch_sims(p, b), n0 + p);

        const int k = std::min<int>(knn_, static_cast<int>(candidates.size()));
        if (k > 0) {
            // Top-k by cosine, ties broken by lower node id.
            std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(),
                              [this](const auto& x, const auto& y) {
                                  if (x.first != y.first) return x.first > y.first;
                                  return node_ids_[x.second] < node_ids_[y.second];
                              });
            for (int c = 0; c < k; ++c) {
                const int j = candidates[c].second;
                const double w = opinions_[idx] * opinions_[j] * candidates[c].first;
                if (w == 0.0) continue;  // structural zero
                link(idx, j, w);
            }
        }
    }
}

Vector initial_relevance(const MemoryGraph& graph, const Vector& query, double tau) {
    if (query.size() != graph.embed_dim())
        throw Error("initial_relevance: query dimension mismatch");
    const int n = graph.size();
    const double qnorm = query.norm();
    Vector f0 = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
        double content_cos = 0.0;
        double keyword_cos = 0.0;
        if (qnorm != 0.0) {
            // Content embeddings are unit (or zero), so the dot product is the
            // cosine; keyword embeddings are normalized by the provider but we
            // guard against zero vectors anyway.
            content_cos = graph.content_embedding(i).dot(query) / qnorm;
            const double knorm = graph.keyword_embedding(i).norm();
            if (knorm != 0.0)
                keyword_cos = graph.keyword_embedding(i).dot(query) / (knorm * qnorm);
        }
        const double hit = keyword_cos >= tau ? 1.0 : 0.0;
        f0(i) = 0.5 * (content_cos + hit);
    }
    return f0;
}

SparseMatrix corrected_laplacian(const MemoryGraph& graph, double nu, double degree_epsilon) {
    const int n = graph.size();
    if (n == 0) throw Error("corrected_laplacian: empty graph");
    if (nu < 1.0) throw Error("corrected_laplacian: nu must be >= 1");

    Vector inv_sqrt_deg(n);
    for (int i = 0; i < n; ++i)
        inv_sqrt_deg(i) = 1.0 / std::sqrt(std::max(graph.degree(i), degree_epsilon));

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * graph.edge_count() + n);
    for (int i = 0; i < n; ++i) {
        const double delta = nu * (graph.abs_degree(i) - graph.degree(i));
        triplets.emplace_back(i, i, 1.0 + delta * inv_sqrt_deg(i) * inv_sqrt_deg(i));
        for (const auto& [j, w] : graph.edges(i))
            triplets.emplace_back(i, j, -w * inv_sqrt_deg(i) * inv_sqrt_deg(j));
    }
    SparseMatrix lap(n, n);
    lap.setFromTriplets(triplets.begin(), triplets.end());
    return lap;
}

Vector solve_closed_form(const SparseMatrix& laplacian, const Vector& f0,
                         double lambda1, double lambda2, double lambda3) {
    const int n = static_cast<int>(laplacian.rows());
    if (n == 0) throw Error("solve_closed_form: empty system");
    if (n > kClosedFormLimit)
        throw Error("solve_closed_form: system too large for a dense solve");
    if (f0.size() != n) throw Error("solve_closed_form: f0 dimension mismatch");

    Matrix system = Matrix(laplacian) * lambda2;
    system.diagonal().array() += lambda1 + lambda3;
    const Vector rhs = lambda1 * f0;

    Eigen::LDLT<Matrix> factor(system);
    if (factor.info() != Eigen::Success)
        throw Error("solve_closed_form: factorization failed");
    Vector f = factor.solve(rhs);

    // Refine until the first-order condition holds to 1e-10 in infinity norm.
    for (int pass = 0; pass < 4; ++pass) {
        const Vector residual = rhs - system * f;
        if (residual.lpNorm<Eigen::Infinity>() <= kFirstOrderResidual) break;
        f += factor.solve(residual);
    }
    if ((rhs - system * f).lpNorm<Eigen::Infinity>() > kFirstOrderResidual)
        throw Error("solve_closed_form: residual target not reached");
    return f;
}

Vector propagation_anchor(const Vector& f0, const RetrievalConfig& config) {
    const double denom = 2.0 * config.lambda1 + config.lambda3 - 1.0;
    if (denom == 0.0)
        throw Error("propagate_retrieval: 2 lambda1 + lambda3 - 1 = 0, f0' undefined");
    return (config.lambda1 / denom) * f0;
}

PropagationResult propagate_retrieval(const SparseMatrix& laplacian, const Vector& f0,
                                      const RetrievalConfig& config) {
    if (std::abs(config.lambda1 + config.lambda2 - 1.0) > 1e-12)
        throw Error("propagate_retrieval: requires lambda1 + lambda2 = 1");

    const double mu = config.mu();
    const Vector f0_prime = propagation_anchor(f0, config);

    PropagationResult result;
    Vector f = f0_prime;
    Vector next(f.size());
    double prev_residual = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    for (int k = 0; k < config.max_iters; ++k) {
        next.noalias() = -(mu * (laplacian * f));
        next += (1.0 - mu) * f0_prime;
        const double residual = (next - f).lpNorm<Eigen::Infinity>();
        f.swap(next);
        ++result.iterations;
        if (residual <= config.residual_tol) {
            result.converged = true;
            break;
        }
        if (residual > prev_residual) {
            if (++growth_streak >= 3) {
                result.diverged = true;
                break;
            }
        } else {
            growth_streak = 0;
        }
        prev_residual = residual;
    }
    result.scores = std::move(f);
    return result;
}

namespace {

/// Sparse fallback for systems too large to solve densely: Jacobi
/// preconditioned conjugate gradient on the SPD first-order system, refined
/// to the same residual target as the dense path.
Vector solve_conjugate_gradient(const SparseMatrix& laplacian, const Vector& f0,
                                const RetrievalConfig& config) {
    SparseMatrix system = laplacian * config.lambda2;
    Vector diag_shift = Vector::Constant(system.rows(), config.lambda1 + config.lambda3);
    SparseMatrix identity(system.rows(), system.rows());
    identity.setIdentity();
    system += SparseMatrix((config.lambda1 + config.lambda3) * identity);
    const Vector rhs = config.lambda1 * f0;

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(10000);
    cg.compute(system);
    Vector f = cg.solve(rhs);
    for (int pass = 0; pass < 5; ++pass) {
        const Vector residual = rhs - system * f;
        if (residual.lpNorm<Eigen::Infinity>() <= kFirstOrderResidual) break;
        f += cg.solve(residual);
    }
    return f;
}

}  // namespace

RetrievalResult retrieve(const MemoryGraph& graph, const Vector& query,
                         const RetrievalConfig& config) {
    RetrievalResult result;
    const int n = graph.size();
    if (n == 0) return result;

    const Vector f0 = initial_relevance(graph, query, config.tau);
    const SparseMatrix laplacian =
        corrected_laplacian(graph, config.nu, config.degree_epsilon);

    PropagationResult prop = propagate_retrieval(laplacian, f0, config);
    result.iterations_used = prop.iterations;
    if (prop.diverged) {
        result.solver = RetrievalSolver::kClosedFormFallback;
        result.scores = n <= kClosedFormLimit
                            ? solve_closed_form(laplacian, f0, config.lambda1,
                                                config.lambda2, config.lambda3)
                            : solve_conjugate_gradient(laplacian, f0, config);
    } else {
        result.solver = RetrievalSolver::kPropagation;
        result.scores = std::move(prop.scores);
    }

    const int r = std::min(config.top_r, n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + r, order.end(), [&](int a, int b) {
        if (result.scores(a) != result.scores(b)) return result.scores(a) > result.scores(b);
        return graph.node_id(a) < graph.node_id(b);
    });
    result.selected.reserve(r);
    for (int i = 0; i < r; ++i) result.selected.push_back(graph.node_id(order[i]));
    return result;
}

double corrected_objective(const SparseMatrix& laplacian, const Vector& f0,
                           double lambda1, double lambda2, double lambda3, const Vector& f) {
    const Vector diff = f - f0;
    return lambda1 * diff.squaredNorm() + lambda2 * f.dot(laplacian * f) +
           lambda3 * f.squaredNorm();
}

}  // namespace gasim
