#pragma once

#include <map>
#include <vector>

#include "gasim/config.hpp"
#include "gasim/rng.hpp"
#include "gasim/types.hpp"

namespace gasim {

class TensorFile;

// ---------------------------------------------------------------------------
// Dynamic feature extraction
// ---------------------------------------------------------------------------

/// Padded per-agent view of neighbor opinion histories: values[i][j][s] is the
/// opinion of agent i's j-th interaction neighbor (ascending id) at step s,
/// zero where mask is 0. Mask row sums equal the interaction degree.
class NeighborTensor {
public:
    NeighborTensor(int n, int m, int t)
        : n_(n), m_(m), t_(t), values_(static_cast<std::size_t>(n) * m * t, 0.0),
          mask_(Matrix::Zero(n, m)) {}

    int n() const { return n_; }
    int m() const { return m_; }
    int t() const { return t_; }

    double value(int i, int j, int s) const { return values_[index(i, j, s)]; }
    double& value(int i, int j, int s) { return values_[index(i, j, s)]; }
    const Matrix& mask() const { return mask_; }
    Matrix& mask() { return mask_; }

private:
    std::size_t index(int i, int j, int s) const {
        return (static_cast<std::size_t>(i) * m_ + j) * t_ + s;
    }

    int n_, m_, t_;
    std::vector<double> values_;
    Matrix mask_;
};

/// Gathers every agent's neighbor histories from the opinion matrix S (N x t),
/// padding rows with fewer than max-degree neighbors with zeros.
NeighborTensor build_neighbor_tensor(const Matrix& opinions, const SocialGraph& graph);

/// Per-agent summary of its own history: [mean, population std, max, min, last].
Matrix individual_features(const Matrix& opinions);

/// Per-agent neighborhood summary: [masked mean, masked population std,
/// mean Pearson against the agent's own history, echo-chamber score
/// sim / (1 + std)]. Undefined Pearson terms (constant series or t = 1)
/// contribute 0; agents without neighbors get all zeros.
Matrix neighbor_features(const Matrix& opinions, const NeighborTensor& neighbors);

/// Same quantities computed straight from adjacency, without materializing the
/// padded tensor. Matches neighbor_features; the engine uses this at scale.
Matrix neighbor_features_adjacency(const Matrix& opinions, const SocialGraph& graph);

/// [individual || neighbor] features, N x 9.
Matrix dynamic_features(const Matrix& opinions, const SocialGraph& graph);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct MlpParams {
    Matrix w1;  // hidden x in
    Vector b1;
    Matrix w2;  // out x hidden
    Vector b2;
};

struct GatHeadParams {
    Matrix weight;     // out x in
    Vector attn_dst;   // out
    Vector attn_src;   // out
    Vector attn_edge;  // out
    Vector edge_map;   // out; lifts the scalar edge weight into feature space
};

struct GatLayerParams {
    std::vector<GatHeadParams> heads;
    Vector bias;  // heads * out, added after head concatenation

    int in_dim() const { return static_cast<int>(heads.at(0).weight.cols()); }
    int head_dim() const { return static_cast<int>(heads.at(0).weight.rows()); }
    int out_dim() const { return head_dim() * static_cast<int>(heads.size()); }
};

/// All learnable weights: two projection MLPs (9 -> 64 and d_b -> 64, hidden
/// width 64) and the GAT stack. The default depth-2 stack is 128 -> 4x8
/// (ReLU) -> 1 (tanh) with per-head attention vectors over
/// [dst || src || edge-feature] and LeakyReLU slope 0.2 on the logits.
struct GmpParams {
    MlpParams dyn_mlp;
    MlpParams static_mlp;
    std::vector<GatLayerParams> gat;

    int profile_dim() const { return static_cast<int>(static_mlp.w1.cols()); }
    int depth() const { return static_cast<int>(gat.size()); }

    static GmpParams init(int profile_dim, int depth, Rng rng);
    static GmpParams zeros_like(const GmpParams& other);

    /// params += scale * other, shape-checked. Used for the descent update.
    void add_scaled(const GmpParams& other, double scale);

    void save(TensorFile& file) const;
    static GmpParams load(const TensorFile& file);
};

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

/// Destination-major adjacency used by the attention layers. Every node gets
/// a leading self-loop slot with edge weight 1.0; the remaining slots follow
/// the interaction edge list in its original order, which pins the summation
/// order and keeps the forward pass exactly permutation-equivariant.
struct GatGraph {
    int n = 0;
    std::vector<int> offsets;  // n + 1
    std::vector<int> src;
    std::vector<double> weight;

    static GatGraph from_social(const SocialGraph& graph);
    static GatGraph from_edges(int n, const std::vector<InteractionEdge>& edges);
};

struct GatLayerCache {
    Matrix input;                 // in x N (column per node)
    std::vector<Matrix> g;        // per head: out x N
    std::vector<Vector> score_dst;  // per head: N
    std::vector<Vector> score_src;  // per head: N
    std::vector<Vector> logit_raw;  // per head: slot array (pre-LeakyReLU)
    std::vector<Vector> alpha;      // per head: slot array
    Matrix pre_activation;        // out_total x N
};

struct MlpCache {
    Matrix input;   // N x in
    Matrix hidden;  // N x hidden, pre-ReLU
};

struct GmpForwardCache {
    MlpCache dyn;
    MlpCache stat;
    std::vector<GatLayerCache> layers;
    Vector prediction;  // N
};

/// X_d = W2 ReLU(W1 phi + b1) + b2 for each row of phi; returns N x out.
Matrix mlp_forward(const Matrix& phi, const MlpParams& mlp, MlpCache* cache = nullptr);

/// Projects dynamic and static features and concatenates them, N x 128.
Matrix project_features(const Matrix& phi_d, const Matrix& phi_s, const GmpParams& params);

/// Runs the attention stack on node features X (N x in). Returns the next
/// opinion column (all entries strictly inside (-1, 1)); fills `cache` when
/// given so gradients can be computed. Attention weights per destination sum
/// to one in every layer.
Vector gat_forward(const Matrix& features, const GatGraph& graph, const GmpParams& params,
                   std::vector<GatLayerCache>* cache = nullptr);

/// alpha * mean_t mean_i (pred - truth)^2  +  beta * mean_t (mean_i pred - mean_i truth)^2.
double gmp_loss(const Matrix& predicted, const Matrix& truth, double alpha, double beta);

/// dL/dpred for gmp_loss.
Matrix gmp_loss_gradient(const Matrix& predicted, const Matrix& truth, double alpha,
                         double beta);

class GmpModel {
public:
    explicit GmpModel(GmpParams params) : params_(std::move(params)) {}

    const GmpParams& params() const { return params_; }
    GmpParams& params() { return params_; }

    /// One prediction from a committed history: extracts dynamic features,
    /// projects, and runs the attention stack. phi_s is the static profile
    /// feature matrix (N x d_b).
    Vector forward(const Matrix& opinions, const SocialGraph& graph, const Matrix& phi_s,
                   GmpForwardCache* cache = nullptr) const;

    /// Static projection X_s = MLP(phi_s); constant across steps, so callers
    /// compute it once per simulation.
    Matrix static_latent(const Matrix& phi_s) const;

    /// forward() with the static projection already computed (N x 64).
    Vector forward_cached_static(const Matrix& opinions, const SocialGraph& graph,
                                 const Matrix& static_latent,
                                 GmpForwardCache* cache = nullptr) const;

    /// Reverse-mode gradients for every parameter given dL/dprediction.
    GmpParams backward(const GmpForwardCache& cache, const GatGraph& graph,
                       const Vector& dprediction) const;

    /// Plain gradient-descent update.
    void apply_gradients(const GmpParams& grads, double learning_rate);

    /// Recursive rollout: appends `steps` predicted columns to the history,
    /// replacing entries listed in core_overrides (one map per step) before
    /// each append.
    Matrix rollout(const Matrix& initial, const SocialGraph& graph, const Matrix& phi_s,
                   int steps,
                   const std::vector<std::map<int, double>>& core_overrides = {}) const;

private:
    GmpParams params_;
};

/// Teacher-forced batch gradient descent on a committed trajectory matrix
/// (N x T): each epoch predicts columns 1..T-1 from the true history prefix,
/// accumulates the loss gradient, and applies one descent step. Returns the
/// per-epoch losses.
std::vector<double> train_gmp(GmpModel& model, const Matrix& truth, const SocialGraph& graph,
                              const Matrix& phi_s, const TrainingConfig& config);

// ---------------------------------------------------------------------------
// Training data preparation
// ---------------------------------------------------------------------------

/// Sparse per-agent observations: (step, value) pairs, steps in [0, t_max).
using SparseObservations = std::vector<std::vector<std::pair<int, double>>>;

/// Fills unobserved entries with 0.5 * linear interpolation of the agent's
/// own observations (edges held constant) + 0.5 * a clamped draw from
/// Normal(global mean at t, global std at t) over agents observed at t.
/// Observed entries are kept verbatim. Every agent needs at least one
/// observation.
Matrix interpolate_trajectories(const SparseObservations& observations, int t_max, Rng rng);

struct KMeansResult {
    std::vector<int> assignments;
    Matrix centroids;  // k x d
    double inertia = 0.0;
    std::vector<double> inertia_history;  // one entry per Lloyd iteration
    int iterations = 0;
};

/// k-means with k-means++ seeding, at most 50 Lloyd iterations, deterministic
/// under a fixed rng. Rows of `points` are samples. n_points >= k required.
KMeansResult cluster_users(const Matrix& points, int k, Rng rng, int max_iters = 50);

}  // namespace gasim
