#include <cmath>

#include "gasim/checkpoint.hpp"
#include "gasim/gmp.hpp"
#include "gasim/parallel.hpp"

namespace gasim {

namespace {

constexpr double kLeakySlope = 0.2;

Matrix glorot(int rows, int cols, Rng& rng) {
    const double scale = std::sqrt(6.0 / (rows + cols));
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
    return m;
}

Vector small_uniform(int size, Rng& rng) {
    const double scale = std::sqrt(3.0 / size);
    Vector v(size);
    for (int i = 0; i < size; ++i) v(i) = rng.uniform(-scale, scale);
    return v;
}

MlpParams init_mlp(int in, int hidden, int out, Rng rng) {
    MlpParams mlp;
    mlp.w1 = glorot(hidden, in, rng);
    mlp.b1 = Vector::Zero(hidden);
    mlp.w2 = glorot(out, hidden, rng);
    mlp.b2 = Vector::Zero(out);
    return mlp;
}

GatLayerParams init_gat_layer(int in, int heads, int head_dim, Rng rng) {
    GatLayerParams layer;
    for (int h = 0; h < heads; ++h) {
        GatHeadParams head;
        Rng weight_rng = rng.derive(h);
        head.weight = glorot(head_dim, in, weight_rng);
        Rng attn = rng.derive(h, 1);
        head.attn_dst = small_uniform(head_dim, attn);
        head.attn_src = small_uniform(head_dim, attn);
        head.attn_edge = small_uniform(head_dim, attn);
        head.edge_map = small_uniform(head_dim, attn);
        layer.heads.push_back(std::move(head));
    }
    layer.bias = Vector::Zero(heads * head_dim);
    return layer;
}

}  // namespace

GmpParams GmpParams::init(int profile_dim, int depth, Rng rng) {
    if (depth < 1) throw Error("GmpParams::init: depth must be >= 1");
    GmpParams p;
    p.dyn_mlp = init_mlp(9, 64, 64, rng.derive(1));
    p.static_mlp = init_mlp(profile_dim, 64, 64, rng.derive(2));
    // Default stack per the architecture table: 128 -> 4 heads x 8 (ReLU
    // between layers) -> 1 head scalar with tanh. Extra depth repeats the
    // 32 -> 4x8 shape ahead of the regression head.
    int in = 128;
    for (int layer = 0; layer < depth; ++layer) {
        const bool last = layer == depth - 1;
        const int heads = last ? 1 : 4;
        const int head_dim = last ? 1 : 8;
        p.gat.push_back(init_gat_layer(in, heads, head_dim, rng.derive(3, layer)));
        in = heads * head_dim;
    }
    return p;
}

GmpParams GmpParams::zeros_like(const GmpParams& other) {
    GmpParams p = other;
    auto zero_mlp = [](MlpParams& m) {
        m.w1.setZero();
        m.b1.setZero();
        m.w2.setZero();
        m.b2.setZero();
    };
    zero_mlp(p.dyn_mlp);
    zero_mlp(p.static_mlp);
    for (auto& layer : p.gat) {
        for (auto& head : layer.heads) {
            head.weight.setZero();
            head.attn_dst.setZero();
            head.attn_src.setZero();
            head.attn_edge.setZero();
            head.edge_map.setZero();
        }
        layer.bias.setZero();
    }
    return p;
}

void GmpParams::add_scaled(const GmpParams& other, double scale) {
    auto add_mlp = [scale](MlpParams& a, const MlpParams& b) {
        a.w1 += scale * b.w1;
        a.b1 += scale * b.b1;
        a.w2 += scale * b.w2;
        a.b2 += scale * b.b2;
    };
    add_mlp(dyn_mlp, other.dyn_mlp);
    add_mlp(static_mlp, other.static_mlp);
    if (gat.size() != other.gat.size()) throw Error("GmpParams::add_scaled: depth mismatch");
    for (std::size_t l = 0; l < gat.size(); ++l) {
        if (gat[l].heads.size() != other.gat[l].heads.size())
            throw Error("GmpParams::add_scaled: head count mismatch");
        for (std::size_t h = 0; h < gat[l].heads.size(); ++h) {
            gat[l].heads[h].weight += scale * other.gat[l].heads[h].weight;
            gat[l].heads[h].attn_dst += scale * other.gat[l].heads[h].attn_dst;
            gat[l].heads[h].attn_src += scale * other.gat[l].heads[h].attn_src;
            gat[l].heads[h].attn_edge += scale * other.gat[l].heads[h].attn_edge;
            gat[l].heads[h].edge_map += scale * other.gat[l].heads[h].edge_map;
        }
        gat[l].bias += scale * other.gat[l].bias;
    }
}

void GmpParams::save(TensorFile& file) const {
    auto put_mlp = [&file](const std::string& prefix, const MlpParams& m) {
        file.put(prefix + ".w1", m.w1);
        file.put(prefix + ".b1", m.b1);
        file.put(prefix + ".w2", m.w2);
        file.put(prefix + ".b2", m.b2);
    };
    put_mlp("dyn_mlp", dyn_mlp);
    put_mlp("static_mlp", static_mlp);
    file.put_scalar("meta.depth", static_cast<double>(gat.size()));
    for (std::size_t l = 0; l < gat.size(); ++l) {
        const std::string lp = "gat." + std::to_string(l);
        file.put_scalar(lp + ".heads", static_cast<double>(gat[l].heads.size()));
        file.put(lp + ".bias", gat[l].bias);
        for (std::size_t h = 0; h < gat[l].heads.size(); ++h) {
            const std::string hp = lp + ".head." + std::to_string(h);
            file.put(hp + ".weight", gat[l].heads[h].weight);
            file.put(hp + ".attn_dst", gat[l].heads[h].attn_dst);
            file.put(hp + ".attn_src", gat[l].heads[h].attn_src);
            file.put(hp + ".attn_edge", gat[l].heads[h].attn_edge);
            file.put(hp + ".edge_map", gat[l].heads[h].edge_map);
        }
    }
}

GmpParams GmpParams::load(const TensorFile& file) {
    GmpParams p;
    auto get_mlp = [&file](const std::string& prefix) {
        MlpParams m;
        m.w1 = file.get(prefix + ".w1");
        m.b1 = file.get_vector(prefix + ".b1");
        m.w2 = file.get(prefix + ".w2");
        m.b2 = file.get_vector(prefix + ".b2");
        return m;
    };
    p.dyn_mlp = get_mlp("dyn_mlp");
    p.static_mlp = get_mlp("static_mlp");
    const int depth = static_cast<int>(file.get_scalar("meta.depth"));
    for (int l = 0; l < depth; ++l) {
        const std::string lp = "gat." + std::to_string(l);
        GatLayerParams layer;
        layer.bias = file.get_vector(lp + ".bias");
        const int heads = static_cast<int>(file.get_scalar(lp + ".heads"));
        for (int h = 0; h < heads; ++h) {
            const std::string hp = lp + ".head." + std::to_string(h);
            GatHeadParams head;
            head.weight = file.get(hp + ".weight");
            head.attn_dst = file.get_vector(hp + ".attn_dst");
            head.attn_src = file.get_vector(hp + ".attn_src");
            head.attn_edge = file.get_vector(hp + ".attn_edge");
            head.edge_map = file.get_vector(hp + ".edge_map");
            layer.heads.push_back(std::move(head));
        }
        p.gat.push_back(std::move(layer));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Graph plumbing
// ---------------------------------------------------------------------------

GatGraph GatGraph::from_edges(int n, const std::vector<InteractionEdge>& edges) {
    GatGraph g;
    g.n = n;
    std::vector<int> counts(n, 1);  // self-loop slot per node
    for (const auto& e : edges) {
        ++counts[e.a];
        ++counts[e.b];
    }
    g.offsets.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + counts[i];
    g.src.resize(g.offsets.back());
    g.weight.resize(g.offsets.back());

    std::vector<int> cursor(n);
    for (int i = 0; i < n; ++i) {
        cursor[i] = g.offsets[i] + 1;
        g.src[g.offsets[i]] = i;  // self-loop first, weight 1.0
        g.weight[g.offsets[i]] = 1.0;
    }
    // Remaining slots follow the edge list order so that relabeling nodes and
    // edges together permutes the computation exactly.
    for (const auto& e : edges) {
        g.src[cursor[e.a]] = e.b;
        g.weight[cursor[e.a]++] = e.weight;
        g.src[cursor[e.b]] = e.a;
        g.weight[cursor[e.b]++] = e.weight;
    }
    return g;
}

GatGraph GatGraph::from_social(const SocialGraph& graph) {
    return from_edges(graph.n_agents(), graph.interaction_edges());
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Matrix mlp_forward(const Matrix& phi, const MlpParams& mlp, MlpCache* cache) {
    if (phi.cols() != mlp.w1.cols()) throw Error("mlp_forward: input width mismatch");
    Matrix hidden_pre = phi * mlp.w1.transpose();
    hidden_pre.rowwise() += mlp.b1.transpose();
    Matrix hidden = hidden_pre.cwiseMax(0.0);
    Matrix out = hidden * mlp.w2.transpose();
    out.rowwise() += mlp.b2.transpose();
    if (cache) {
        cache->input = phi;
        cache->hidden = std::move(hidden_pre);
    }
    return out;
}

Matrix project_features(const Matrix& phi_d, const Matrix& phi_s, const GmpParams& params) {
    if (phi_d.rows() != phi_s.rows())
        throw Error("project_features: row count mismatch between feature groups");
    Matrix x(phi_d.rows(), 128);
    x.leftCols(64) = mlp_forward(phi_d, params.dyn_mlp);
    x.rightCols(64) = mlp_forward(phi_s, params.static_mlp);
    return x;
}

namespace {

/// One attention layer. `input` is in x N (nodes as columns); returns the
/// pre-activation out_total x N and fills the cache when requested.
Matrix gat_layer_forward(const Matrix& input, const GatGraph& graph,
                         const GatLayerParams& layer, GatLayerCache* cache) {
    const int n = graph.n;
    const int heads = static_cast<int>(layer.heads.size());
    const int head_dim = layer.head_dim();
    const int slots = static_cast<int>(graph.src.size());

    Matrix out(heads * head_dim, n);
    if (cache) {
        cache->input = input;
        cache->g.resize(heads);
        cache->score_dst.resize(heads);
        cache->score_src.resize(heads);
        cache->logit_raw.resize(heads);
        cache->alpha.resize(heads);
    }

    for (int h = 0; h < heads; ++h) {
        const GatHeadParams& head = layer.heads[h];
        Matrix g = head.weight * input;  // head_dim x N
        Vector score_dst = g.transpose() * head.attn_dst;
        Vector score_src = g.transpose() * head.attn_src;
        const double edge_coef = head.attn_edge.dot(head.edge_map);

        Vector logit_raw(slots);
        Vector alpha(slots);
        auto out_block = out.middleRows(h * head_dim, head_dim);

        parallel_for(n, [&](int i) {
            const int lo = graph.offsets[i];
            const int hi = graph.offsets[i + 1];
            double max_logit = -std::numeric_limits<double>::infinity();
            for (int s = lo; s < hi; ++s) {
                const double raw = score_dst(i) + score_src(graph.src[s]) +
                                   edge_coef * graph.weight[s];
                logit_raw(s) = raw;
                const double act = raw > 0.0 ? raw : kLeakySlope * raw;
                alpha(s) = act;
                max_logit = std::max(max_logit, act);
            }
            double denom = 0.0;
            for (int s = lo; s < hi; ++s) {
                alpha(s) = std::exp(alpha(s) - max_logit);
                denom += alpha(s);
            }
            auto col = out_block.col(i);
            col.setZero();
            for (int s = lo; s < hi; ++s) {
                alpha(s) /= denom;
                col += alpha(s) * g.col(graph.src[s]);
            }
        });

        if (cache) {
            cache->g[h] = std::move(g);
            cache->score_dst[h] = std::move(score_dst);
            cache->score_src[h] = std::move(score_src);
            cache->logit_raw[h] = std::move(logit_raw);
            cache->alpha[h] = std::move(alpha);
        }
    }
    out.colwise() += layer.bias;
    if (cache) cache->pre_activation = out;
    return out;
}

}  // namespace

Vector gat_forward(const Matrix& features, const GatGraph& graph, const GmpParams& params,
                   std::vector<GatLayerCache>* cache) {
    if (features.rows() != graph.n) throw Error("gat_forward: node count mismatch");
    if (params.gat.empty()) throw Error("gat_forward: no attention layers");
    if (features.cols() != params.gat.front().in_dim())
        throw Error("gat_forward: feature width mismatch");

    if (cache) cache->resize(params.gat.size());
    Matrix h = features.transpose();  // in x N
    for (std::size_t l = 0; l < params.gat.size(); ++l) {
        GatLayerCache* layer_cache = cache ? &(*cache)[l] : nullptr;
        Matrix z = gat_layer_forward(h, graph, params.gat[l], layer_cache);
        const bool last = l + 1 == params.gat.size();
        h = last ? z : z.cwiseMax(0.0);
    }
    if (h.rows() != 1) throw Error("gat_forward: final layer must emit a scalar per node");
    return h.transpose().col(0).array().tanh();
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

double gmp_loss(const Matrix& predicted, const Matrix& truth, double alpha, double beta) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw Error("gmp_loss: shape mismatch");
    const double n = static_cast<double>(predicted.rows());
    const double t_max = static_cast<double>(predicted.cols());
    const Matrix diff = predicted - truth;
    const double local = diff.array().square().sum() / (n * t_max);
    double global = 0.0;
    for (Eigen::Index t = 0; t < predicted.cols(); ++t) {
        const double d = predicted.col(t).mean() - truth.col(t).mean();
        global += d * d;
    }
    global /= t_max;
    return alpha * local + beta * global;
}

Matrix gmp_loss_gradient(const Matrix& predicted, const Matrix& truth, double alpha,
                         double beta) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw Error("gmp_loss_gradient: shape mismatch");
    const double n = static_cast<double>(predicted.rows());
    const double t_max = static_cast<double>(predicted.cols());
    Matrix grad = (2.0 * alpha / (n * t_max)) * (predicted - truth);
    for (Eigen::Index t = 0; t < predicted.cols(); ++t) {
        const double d = predicted.col(t).mean() - truth.col(t).mean();
        grad.col(t).array() += 2.0 * beta * d / (n * t_max);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace {

/// Backprop through one attention layer. dz is the gradient at the layer's
/// pre-activation (out_total x N). Returns the gradient at the layer input.
Matrix gat_layer_backward(const GatLayerCache& cache, const GatGraph& graph,
                          const GatLayerParams& layer, const Matrix& dz,
                          GatLayerParams& grads) {
    const int n = graph.n;
    const int heads = static_cast<int>(layer.heads.size());
    const int head_dim = layer.head_dim();

    Matrix dinput = Matrix::Zero(cache.input.rows(), n);
    grads.bias += dz.rowwise().sum();

    for (int h = 0; h < heads; ++h) {
        const GatHeadParams& head = layer.heads[h];
        GatHeadParams& hgrad = grads.heads[h];
        const Matrix& g = cache.g[h];
        const Vector& alpha = cache.alpha[h];
        const Vector& logit_raw = cache.logit_raw[h];
        const auto dagg = dz.middleRows(h * head_dim, head_dim);

        Matrix dg = Matrix::Zero(head_dim, n);
        Vector dscore_dst = Vector::Zero(n);
        Vector dscore_src = Vector::Zero(n);
        double dedge_coef = 0.0;

        for (int i = 0; i < n; ++i) {
            const int lo = graph.offsets[i];
            const int hi = graph.offsets[i + 1];
            // out_i = sum_s alpha_s g_{src(s)}
            double inner = 0.0;  // sum_s alpha_s dalpha_s for the softmax jacobian
            for (int s = lo; s < hi; ++s) {
                const double dalpha = dagg.col(i).dot(g.col(graph.src[s]));
                inner += alpha(s) * dalpha;
                dg.col(graph.src[s]) += alpha(s) * dagg.col(i);
            }
            for (int s = lo; s < hi; ++s) {
                const double dalpha = dagg.col(i).dot(g.col(graph.src[s]));
                const double dlogit = alpha(s) * (dalpha - inner);
                const double slope = logit_raw(s) > 0.0 ? 1.0 : kLeakySlope;
                const double draw = dlogit * slope;
                dscore_dst(i) += draw;
                dscore_src(graph.src[s]) += draw;
                dedge_coef += draw * graph.weight[s];
            }
        }

        // score_dst = g^T attn_dst, score_src = g^T attn_src
        hgrad.attn_dst += g * dscore_dst;
        hgrad.attn_src += g * dscore_src;
        dg += head.attn_dst * dscore_dst.transpose();
        dg += head.attn_src * dscore_src.transpose();
        // edge_coef = attn_edge . edge_map
        hgrad.attn_edge += dedge_coef * head.edge_map;
        hgrad.edge_map += dedge_coef * head.attn_edge;

        hgrad.weight += dg * cache.input.transpose();
        dinput += head.weight.transpose() * dg;
    }
    return dinput;
}

/// Backprop through one projection MLP. dout is N x out; returns nothing for
/// the feature inputs (they are data, not parameters).
void mlp_backward(const MlpCache& cache, const MlpParams& mlp, const Matrix& dout,
                  MlpParams& grads) {
    const Matrix hidden = cache.hidden.cwiseMax(0.0);  // N x hidden
    grads.w2 += dout.transpose() * hidden;
    grads.b2 += dout.colwise().sum();
    Matrix dhidden = dout * mlp.w2;  // N x hidden
    dhidden = dhidden.cwiseProduct(
        (cache.hidden.array() > 0.0).cast<double>().matrix());
    grads.w1 += dhidden.transpose() * cache.input;
    grads.b1 += dhidden.colwise().sum();
}

}  // namespace

Vector GmpModel::forward(const Matrix& opinions, const SocialGraph& graph,
                         const Matrix& phi_s, GmpForwardCache* cache) const {
    if (phi_s.rows() != opinions.rows())
        throw Error("GmpModel::forward: profile feature row count mismatch");
    if (phi_s.cols() != params_.profile_dim())
        throw Error("GmpModel::forward: profile feature width mismatch");
    const Matrix latent =
        mlp_forward(phi_s, params_.static_mlp, cache ? &cache->stat : nullptr);
    return forward_cached_static(opinions, graph, latent, cache);
}

Matrix GmpModel::static_latent(const Matrix& phi_s) const {
    return mlp_forward(phi_s, params_.static_mlp);
}

Vector GmpModel::forward_cached_static(const Matrix& opinions, const SocialGraph& graph,
                                       const Matrix& static_latent,
                                       GmpForwardCache* cache) const {
    if (opinions.rows() != graph.n_agents())
        throw Error("GmpModel::forward: history row count does not match the graph");
    if (static_latent.rows() != opinions.rows() || static_latent.cols() != 64)
        throw Error("GmpModel::forward: static latent must be N x 64");

    const Matrix phi_d = dynamic_features(opinions, graph);
    Matrix x(opinions.rows(), 128);
    x.leftCols(64) = mlp_forward(phi_d, params_.dyn_mlp, cache ? &cache->dyn : nullptr);
    x.rightCols(64) = static_latent;

    const GatGraph gat_graph = GatGraph::from_social(graph);
    Vector pred = gat_forward(x, gat_graph, params_, cache ? &cache->layers : nullptr);
    if (cache) cache->prediction = pred;
    return pred;
}

GmpParams GmpModel::backward(const GmpForwardCache& cache, const GatGraph& graph,
                             const Vector& dprediction) const {
    GmpParams grads = GmpParams::zeros_like(params_);

    // tanh output layer
    Vector dz_last =
        dprediction.array() * (1.0 - cache.prediction.array().square());
    Matrix dz = dz_last.transpose();  // 1 x N

    for (int l = static_cast<int>(params_.gat.size()) - 1; l >= 0; --l) {
        Matrix dinput =
            gat_layer_backward(cache.layers[l], graph, params_.gat[l], dz, grads.gat[l]);
        if (l > 0) {
            // ReLU between layers: gate by the previous layer's pre-activation.
            dz = dinput.cwiseProduct(
                (cache.layers[l - 1].pre_activation.array() > 0.0).cast<double>().matrix());
        } else {
            dz = std::move(dinput);  // gradient at X^T (128 x N)
        }
    }

    const Matrix dx = dz.transpose();  // N x 128
    mlp_backward(cache.dyn, params_.dyn_mlp, dx.leftCols(64), grads.dyn_mlp);
    mlp_backward(cache.stat, params_.static_mlp, dx.rightCols(64), grads.static_mlp);
    return grads;
}

void GmpModel::apply_gradients(const GmpParams& grads, double learning_rate) {
    params_.add_scaled(grads, -learning_rate);
}

Matrix GmpModel::rollout(const Matrix& initial, const SocialGraph& graph,
                         const Matrix& phi_s, int steps,
                         const std::vector<std::map<int, double>>& core_overrides) const {
    if (initial.cols() < 1) throw Error("GmpModel::rollout: need at least one column");
    Matrix state = initial;
    for (int s = 0; s < steps; ++s) {
        Vector next = forward(state, graph, phi_s);
        if (s < static_cast<int>(core_overrides.size())) {
            for (const auto& [agent, value] : core_overrides[s]) {
                if (agent < 0 || agent >= next.size())
                    throw Error("GmpModel::rollout: override agent out of range");
                next(agent) = OpinionValue(value);
            }
        }
        state.conservativeResize(Eigen::NoChange, state.cols() + 1);
        state.col(state.cols() - 1) = next;
    }
    return state;
}

std::vector<double> train_gmp(GmpModel& model, const Matrix& truth, const SocialGraph& graph,
                              const Matrix& phi_s, const TrainingConfig& config) {
    config.validate();
    const int t_total = static_cast<int>(truth.cols());
    if (t_total < 2) throw Error("train_gmp: need at least two committed columns");
    const int t_pred = t_total - 1;
    const GatGraph gat_graph = GatGraph::from_social(graph);

    std::vector<double> losses;
    losses.reserve(config.epochs);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        GmpParams grads = GmpParams::zeros_like(model.params());
        Matrix predictions(truth.rows(), t_pred);
        std::vector<GmpForwardCache> caches(t_pred);
        for (int t = 1; t < t_total; ++t) {
            predictions.col(t - 1) =
                model.forward(truth.leftCols(t), graph, phi_s, &caches[t - 1]);
        }
        const Matrix target = truth.rightCols(t_pred);
        losses.push_back(gmp_loss(predictions, target, config.alpha, config.beta));
        const Matrix dpred =
            gmp_loss_gradient(predictions, target, config.alpha, config.beta);
        for (int t = 0; t < t_pred; ++t) {
            GmpParams step_grads = model.backward(caches[t], gat_graph, dpred.col(t));
            grads.add_scaled(step_grads, 1.0);
        }
        model.apply_gradients(grads, config.learning_rate);
    }
    return losses;
}

}  // namespace gasim
