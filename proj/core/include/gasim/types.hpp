#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gasim {

/// Base class for all precondition / validation failures in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Scalar stance in [-1, +1]; -1 extremely negative, +1 extremely supportive.
/// Construction clamps, so a stored opinion can never leave the range.
class OpinionValue {
public:
    OpinionValue() = default;
    OpinionValue(double v) : value_(clamp(v)) {}  // NOLINT: implicit by design

    double value() const { return value_; }
    operator double() const { return value_; }

    static double clamp(double v) { return std::min(1.0, std::max(-1.0, v)); }

private:
    double value_ = 0.0;
};

struct AgentProfile {
    int agent_id = 0;
    std::string description;
    std::int64_t follower_count = 0;
    std::int64_t following_count = 0;
    Vector profile_embedding;  // dimension d_b, shared across the population
};

/// A post as perceived by other agents: text plus its embeddings and the
/// scalar stance attached to it.
struct Message {
    int author_id = 0;
    std::string content;
    Vector content_embedding;  // unit norm, or zero for empty content
    Vector keyword_embedding;
    OpinionValue opinion;
    int step = 0;
};

struct FollowEdge {
    int follower = 0;
    int followee = 0;
};

struct InteractionEdge {
    int a = 0;
    int b = 0;
    double weight = 1.0;
};

/// Directed follow network plus the undirected weighted interaction graph
/// used by EDG, GMP and message delivery. Adjacency is precomputed in CSR
/// form with neighbors in ascending id order.
class SocialGraph {
public:
    SocialGraph() = default;
    SocialGraph(int n_agents, std::vector<FollowEdge> follow_edges,
                std::vector<InteractionEdge> interaction_edges);

    /// Interaction graph = symmetrized follow edges with weight 1.0.
    static SocialGraph from_follow_edges(int n_agents, std::vector<FollowEdge> follow_edges);

    int n_agents() const { return n_agents_; }
    const std::vector<FollowEdge>& follow_edges() const { return follow_edges_; }
    const std::vector<InteractionEdge>& interaction_edges() const { return interaction_edges_; }

    std::span<const int> neighbors(int agent) const {
        return {adj_ids_.data() + adj_offsets_[agent],
                adj_ids_.data() + adj_offsets_[agent + 1]};
    }
    std::span<const double> neighbor_weights(int agent) const {
        return {adj_w_.data() + adj_offsets_[agent],
                adj_w_.data() + adj_offsets_[agent + 1]};
    }
    int degree(int agent) const { return adj_offsets_[agent + 1] - adj_offsets_[agent]; }

    /// Maximum interaction-neighbor count over all agents (padding width M).
    int max_degree() const { return max_degree_; }

    /// Follower count of an agent (in-degree of the follow network).
    int in_degree(int agent) const { return in_degree_[agent]; }
    const std::vector<int>& in_degrees() const { return in_degree_; }

private:
    void build_adjacency();

    int n_agents_ = 0;
    std::vector<FollowEdge> follow_edges_;
    std::vector<InteractionEdge> interaction_edges_;
    std::vector<int> adj_offsets_;  // size n_agents_ + 1
    std::vector<int> adj_ids_;
    std::vector<double> adj_w_;
    std::vector<int> in_degree_;
    int max_degree_ = 0;
};

/// Evolving simulation state. `history` holds one column per committed step,
/// every entry in [-1, 1]; `step()` equals the column count.
class OpinionState {
public:
    OpinionState() = default;
    explicit OpinionState(Matrix history) { reset(std::move(history)); }

    void reset(Matrix history) {
        for (Eigen::Index j = 0; j < history.cols(); ++j)
            for (Eigen::Index i = 0; i < history.rows(); ++i)
                history(i, j) = OpinionValue::clamp(history(i, j));
        history_ = std::move(history);
    }

    int step() const { return static_cast<int>(history_.cols()); }
    int n_agents() const { return static_cast<int>(history_.rows()); }
    const Matrix& history() const { return history_; }

    /// Appends one committed column, clamping every entry.
    void append_column(const Vector& column) {
        if (column.size() != history_.rows())
            throw Error("OpinionState::append_column: row count mismatch");
        history_.conservativeResize(Eigen::NoChange, history_.cols() + 1);
        for (Eigen::Index i = 0; i < column.size(); ++i)
            history_(i, history_.cols() - 1) = OpinionValue::clamp(column(i));
    }

private:
    Matrix history_;
};

}  // namespace gasim
