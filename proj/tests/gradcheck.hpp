#pragma once

// Finite-difference verification of the GMP analytic gradients, shared by the
// unit suite and the acceptance suite.

#include <cmath>
#include <string>
#include <vector>

#include "gasim/gmp.hpp"
#include "test_helpers.hpp"

namespace gasim::testing {

struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index size;
};

inline std::vector<TensorRef> parameter_tensors(GmpParams& p) {
    std::vector<TensorRef> refs;
    auto add = [&refs](const std::string& name, auto& tensor) {
        refs.push_back({name, tensor.data(), tensor.size()});
    };
    add("dyn.w1", p.dyn_mlp.w1);
    add("dyn.b1", p.dyn_mlp.b1);
    add("dyn.w2", p.dyn_mlp.w2);
    add("dyn.b2", p.dyn_mlp.b2);
    add("static.w1", p.static_mlp.w1);
    add("static.b1", p.static_mlp.b1);
    add("static.w2", p.static_mlp.w2);
    add("static.b2", p.static_mlp.b2);
    for (std::size_t l = 0; l < p.gat.size(); ++l) {
        const std::string lp = "gat" + std::to_string(l);
        add(lp + ".bias", p.gat[l].bias);
        for (std::size_t h = 0; h < p.gat[l].heads.size(); ++h) {
            const std::string hp = lp + ".h" + std::to_string(h);
            add(hp + ".w", p.gat[l].heads[h].weight);
            add(hp + ".attn_dst", p.gat[l].heads[h].attn_dst);
            add(hp + ".attn_src", p.gat[l].heads[h].attn_src);
            add(hp + ".attn_edge", p.gat[l].heads[h].attn_edge);
            add(hp + ".edge_map", p.gat[l].heads[h].edge_map);
        }
    }
    return refs;
}

/// Sign pattern of every ReLU / LeakyReLU pre-activation in a forward cache;
/// parameters whose perturbation flips (or grazes) a kink are excluded from
/// the finite-difference comparison.
inline bool kink_safe(const GmpForwardCache& a, const GmpForwardCache& b, double margin) {
    auto scan = [margin](const Matrix& x, const Matrix& y) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (std::abs(x.data()[i]) < margin || std::abs(y.data()[i]) < margin) return false;
            if ((x.data()[i] > 0) != (y.data()[i] > 0)) return false;
        }
        return true;
    };
    if (!scan(a.dyn.hidden, b.dyn.hidden)) return false;
    if (!scan(a.stat.hidden, b.stat.hidden)) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t h = 0; h < a.layers[l].logit_raw.size(); ++h)
            if (!scan(Matrix(a.layers[l].logit_raw[h]), Matrix(b.layers[l].logit_raw[h])))
                return false;
        if (l + 1 < a.layers.size())
            if (!scan(a.layers[l].pre_activation, b.layers[l].pre_activation)) return false;
    }
    return true;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped_kinks = 0;
    std::string worst;
};

/// One random instance: N agents, max degree capped by the ring-plus-chords
/// construction, t history steps. Samples entries of every parameter tensor
/// and compares analytic gradients with central differences (step h).
inline GradCheckResult gradient_check_instance(std::uint64_t seed, int n, int t,
                                               int profile_dim, double h,
                                               int samples_per_tensor) {
    Rng rng(seed);
    // Ring (degree 2) plus one chord: max degree 3.
    std::vector<InteractionEdge> edges;
    for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, rng.uniform(0.2, 1.0)});
    edges.push_back({0, n / 2, rng.uniform(0.2, 1.0)});
    std::vector<FollowEdge> follows;
    for (const auto& e : edges) follows.push_back({e.a, e.b});
    const SocialGraph graph(n, follows, edges);
    const GatGraph gat_graph = GatGraph::from_social(graph);

    const Matrix history = random_history(rng, n, t);
    const Matrix phi_s = random_history(rng, n, profile_dim);
    Matrix target(n, 1);
    for (int i = 0; i < n; ++i) target(i, 0) = rng.uniform(-1.0, 1.0);

    GmpModel model(GmpParams::init(profile_dim, 2, rng.derive(1)));

    GmpForwardCache cache;
    Matrix pred(n, 1);
    pred.col(0) = model.forward(history, graph, phi_s, &cache);
    const Matrix dpred = gmp_loss_gradient(pred, target, 0.9, 0.1);
    const GmpParams analytic = model.backward(cache, gat_graph, dpred.col(0));

    GmpParams grads_view = analytic;  // same shapes, used for indexing
    auto analytic_refs = parameter_tensors(grads_view);
    auto param_refs = parameter_tensors(model.params());

    auto loss_at = [&](GmpForwardCache* c) {
        Matrix p(n, 1);
        p.col(0) = model.forward(history, graph, phi_s, c);
        return gmp_loss(p, target, 0.9, 0.1);
    };

    GradCheckResult result;
    Rng pick = rng.derive(2);
    for (std::size_t tr = 0; tr < param_refs.size(); ++tr) {
        auto& ref = param_refs[tr];
        const int count = std::min<Eigen::Index>(samples_per_tensor, ref.size);
        for (int s = 0; s < count; ++s) {
            const Eigen::Index idx =
                count == ref.size ? s : static_cast<Eigen::Index>(pick.uniform_int(ref.size));
            const double saved = ref.data[idx];

            GmpForwardCache plus_cache, minus_cache;
            ref.data[idx] = saved + h;
            const double loss_plus = loss_at(&plus_cache);
            ref.data[idx] = saved - h;
            const double loss_minus = loss_at(&minus_cache);
            ref.data[idx] = saved;

            if (!kink_safe(plus_cache, minus_cache, 1e-7)) {
                ++result.skipped_kinks;
                continue;
            }
            const double fd = (loss_plus - loss_minus) / (2.0 * h);
            const double an = analytic_refs[tr].data[idx];
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            ++result.checked;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst = ref.name + "[" + std::to_string(idx) + "]";
            }
        }
    }
    return result;
}

}  // namespace gasim::testing
