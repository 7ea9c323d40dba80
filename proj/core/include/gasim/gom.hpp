#pragma once

#include <Eigen/Sparse>

#include <string>
#include <unordered_map>
#include <vector>

#include "gasim/config.hpp"
#include "gasim/types.hpp"

namespace gasim {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// One remembered message: the unit (or zero) content embedding drives the
/// kNN linking, the keyword embedding feeds the thresholded relevance term,
/// and the opinion signs the edge weights.
struct MemoryNode {
    int node_id = 0;
    std::string content;
    Vector content_embedding;
    Vector keyword_embedding;
    OpinionValue opinion;
    int step_created = 0;
};

/// Sparse signed weighted graph over one agent's memories.
///
/// Inserting node i links it to its top-k most similar existing memories by
/// content cosine, with edge weight o_i * o_j * cos(m_i, m_j). Edges are
/// symmetric, built against the graph state at insertion time and never
/// rewired; zero weights are dropped as structural zeros.
class MemoryGraph {
public:
    explicit MemoryGraph(int embed_dim, int knn = 10);

    int size() const { return n_; }
    int embed_dim() const { return embed_dim_; }
    int knn() const { return knn_; }

    void insert(const MemoryNode& node);
    void insert_batch(const std::vector<MemoryNode>& nodes);

    int node_id(int index) const { return node_ids_[index]; }
    const std::string& content(int index) const { return contents_[index]; }
    double opinion(int index) const { return opinions_[index]; }
    int step_created(int index) const { return steps_[index]; }
    Eigen::Ref<const Vector> content_embedding(int index) const {
        return content_emb_.col(index);
    }
    Eigen::Ref<const Vector> keyword_embedding(int index) const {
        return keyword_emb_.col(index);
    }

    /// Neighbors of a node as (index, weight) pairs sorted by index.
    const std::vector<std::pair<int, double>>& edges(int index) const { return adj_[index]; }

    /// Signed degree d_ii = sum_j w_ij.
    double degree(int index) const { return degree_[index]; }
    /// Sum of |w_ij| over the row; the Gershgorin correction needs it.
    double abs_degree(int index) const { return abs_degree_[index]; }

    std::size_t edge_count() const { return edge_count_; }

private:
    void link(int a, int b, double w);
    void ensure_capacity(int extra);

    int embed_dim_;
    int knn_;
    int n_ = 0;
    Matrix content_emb_;  // embed_dim x capacity, first n_ columns live
    Matrix keyword_emb_;
    std::vector<int> node_ids_;
    std::vector<std::string> contents_;
    std::vector<double> opinions_;
    std::vector<int> steps_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
    std::vector<double> degree_;
    std::vector<double> abs_degree_;
    std::unordered_map<int, int> id_to_index_;
    std::size_t edge_count_ = 0;
};

/// Initial relevance f0: (f0)_i = 1/2 (cos(q, m_i) + H_tau(cos(q, k_i)))
/// with the hard threshold H_tau(x) = 1 if x >= tau else 0.
Vector initial_relevance(const MemoryGraph& graph, const Vector& query, double tau);

/// Corrected normalized Laplacian of the signed memory graph:
///   L' = I - D~^{-1/2} W D~^{-1/2} + D~^{-1/2} Delta D~^{-1/2}
/// with Delta_ii = nu (sum_j |w_ij| - d_ii) and d~_ii = max(d_ii, eps).
/// (L + Delta) is positive semidefinite by the Gershgorin bound, so the
/// retrieval objective built on L' is convex.
SparseMatrix corrected_laplacian(const MemoryGraph& graph, double nu, double degree_epsilon);

/// Dense closed-form solve f* = lambda1 [(lambda1+lambda3) I + lambda2 L']^{-1} f0.
/// Intended for oracle use; refuses systems larger than 2000 unknowns.
/// The returned solution satisfies the first-order condition with infinity-norm
/// residual <= 1e-10 (iterative refinement is applied until it does).
Vector solve_closed_form(const SparseMatrix& laplacian, const Vector& f0,
                         double lambda1, double lambda2, double lambda3);

struct PropagationResult {
    Vector scores;
    int iterations = 0;
    bool converged = false;
    bool diverged = false;  // residual grew three iterations in a row
};

/// The iteration's anchor f0' = lambda1 / (2 lambda1 + lambda3 - 1) * f0.
/// With lambda = (0.5, 0.5, 0.5) this is f0 bit-exactly.
Vector propagation_anchor(const Vector& f0, const RetrievalConfig& config);

/// Lightweight fixed-point retrieval: f_{k+1} = mu (-L') f_k + (1-mu) f0'.
/// Each iteration costs one sparse matrix-vector product. Requires
/// lambda1 + lambda2 = 1; errors when 2 lambda1 + lambda3 - 1 = 0 (f0'
/// undefined). A diverging run is reported so callers can fall back to the
/// closed form.
PropagationResult propagate_retrieval(const SparseMatrix& laplacian, const Vector& f0,
                                      const RetrievalConfig& config);

enum class RetrievalSolver { kPropagation, kClosedFormFallback };

struct RetrievalResult {
    Vector scores;
    std::vector<int> selected;  // node ids of the top-R scores, ties by lower id
    int iterations_used = 0;
    RetrievalSolver solver = RetrievalSolver::kPropagation;
};

/// Full retrieval: relevance anchor, corrected Laplacian, propagation with
/// closed-form fallback on divergence, then top-R selection (R capped at the
/// node count). An empty graph yields an empty result.
RetrievalResult retrieve(const MemoryGraph& graph, const Vector& query,
                         const RetrievalConfig& config);

/// Corrected objective Q~(f); test and diagnostics helper.
double corrected_objective(const SparseMatrix& laplacian, const Vector& f0,
                           double lambda1, double lambda2, double lambda3, const Vector& f);

}  // namespace gasim
