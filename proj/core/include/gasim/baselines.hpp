#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gasim/rng.hpp"
#include "gasim/types.hpp"

namespace gasim {

enum class AbmModel { kHK, kRA, kLorenz };

AbmModel abm_model_from_string(const std::string& name);
std::string to_string(AbmModel model);

struct LorenzParams {
    double assimilation_threshold = 0.3;
    double contrast_threshold = 1.2;
    double assimilation_strength = 0.3;
    double contrast_strength = 0.1;
};

struct AbmConfig {
    AbmModel model = AbmModel::kHK;
    double confidence_epsilon = 0.5;  // HK bounded-confidence radius, (0, 2]
    double uncertainty = 0.5;         // RA uncertainty half-width
    double convergence_mu = 0.3;      // RA convergence rate, (0, 0.5]
    LorenzParams lorenz;

    void validate() const;
};

/// One update of the classical sequential ABM. Agents are processed one by
/// one in id order (that sequential loop is the phenomenon the latency
/// benchmark measures); every agent reads the fully committed previous
/// column, so the rules keep their usual synchronous semantics.
///
/// HK: average of neighbor opinions within epsilon of one's own, self
/// included. RA: one random neighbor, overlap-weighted relative-agreement
/// shift. Lorenz: attraction within the assimilation threshold, repulsion
/// beyond the contrast threshold, averaged over neighbors. All outputs are
/// clamped to [-1, 1].
Vector abm_step(const AbmConfig& config, const OpinionState& state, const SocialGraph& graph,
                Rng& rng);

/// Runs `steps` updates and returns the full N x (1 + steps) history.
Matrix run_abm(const AbmConfig& config, const Vector& initial, const SocialGraph& graph,
               int steps, Rng rng);

/// Measured latency profile of the sequential baseline against the batched
/// update at matching sizes.
struct BenchReport {
    std::string model;
    std::vector<int> sizes;
    std::vector<double> abm_seconds_per_step;       // full framework loop
    std::vector<double> abm_rule_seconds_per_step;  // update rule only
    std::vector<double> gmp_seconds_per_step;       // one batched forward
    std::vector<double> speedup_vs_gmp;             // framework / batched per size
    double fitted_exponent = 0.0;  // log-log slope of the framework loop
    double doubling_ratio = 0.0;   // 2^fitted_exponent
    double extrapolated_hours_1m_agents_30_steps = 0.0;
    std::uint64_t seed = 0;
};

using TextEmbedder = std::function<Vector(const std::string&)>;

/// Times the sequential ABM stage the way a hybrid framework executes it —
/// per agent in id order: neighbor selection, materializing the neighbors'
/// posts (text plus embeddings) into a private inbox, then the attitude
/// update — next to the update rule alone and to one batched GMP step on the
/// same graphs. Fits the scaling exponent across `sizes` and extrapolates the
/// framework loop to one million agents over thirty steps.
BenchReport bench_sequential(const AbmConfig& config, const std::vector<int>& sizes,
                             int trials, const TextEmbedder& embedder, int embed_dim,
                             std::uint64_t seed);

void write_bench_report(const std::string& path, const BenchReport& report);

}  // namespace gasim
