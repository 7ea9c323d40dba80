#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gasim/config.hpp"
#include "gasim/dataset.hpp"
#include "gasim/edg.hpp"
#include "gasim/gmp.hpp"
#include "gasim/gom.hpp"
#include "gasim/metrics.hpp"
#include "gasim/providers.hpp"

namespace gasim {

struct PartitionSummary {
    int step = 0;
    std::vector<int> core_ids;
    double mean_core_entropy = 0.0;
};

struct CentralityRow {
    int step = 0;
    int ge_p80 = 0;
    int p60_80 = 0;
    int p40_60 = 0;
    int lt_p40 = 0;
    double top20_share = 0.0;
};

struct CentralityTable {
    std::vector<CentralityRow> rows;
    double mean_top20_share = 0.0;
};

struct SimulationReport {
    int n_agents = 0;
    int t_max = 0;
    int top_k_core = 0;
    std::uint64_t seed = 0;
    TrendCurve trend;
    std::vector<PartitionSummary> partitions;
    std::optional<TrendMetrics> metrics;
    CentralityTable centrality;
};

struct SimulationResult {
    SimulationReport report;
    OpinionState state;
    /// Scored opinion of every (step, agent) that ran the core pipeline;
    /// these exact values appear in the state, never the batched update's.
    std::map<std::pair<int, int>, double> core_scores;
    /// Generated text per (step, agent) core activation.
    std::map<std::pair<int, int>, std::string> core_texts;
};

/// Core-agent in-degree percentile bands at the sampled steps. Agents are
/// ranked by (in-degree, id); a band holds the core agents whose rank falls
/// in the matching quantile of the population, so band counts always sum to
/// K and uniform-degree graphs are split by rank, not by value.
CentralityTable core_centrality_report(const std::vector<PartitionSummary>& partitions,
                                       const SocialGraph& graph,
                                       const std::vector<int>& sampled_steps);

/// Steps sampled for the centrality table: {1, 5, 10, 15, 20, 25, 30}
/// intersected with the executed step range.
std::vector<int> centrality_sample_steps(int executed_steps);

/// Full GASim pipeline. Per step: entropy partition on the committed
/// history, the Observe-Recall-Act core pipeline for every core agent
/// (parallel across agents), one batched GMP update for the rest, scored
/// core opinions overriding the batched column, scheduled news broadcast
/// into every inbox. Deterministic: identical (config, dataset, seed) give
/// bit-identical results under stub providers.
class SimulationEngine {
public:
    SimulationEngine(SimConfig config, ProviderBundle providers, GmpParams gmp_params);

    /// Replaces the generated network / synthesized profiles / drawn initial
    /// opinions. Call before run().
    void set_graph(SocialGraph graph);
    void set_profiles(std::vector<AgentProfile> profiles);
    void set_initial_opinions(Vector opinions);
    void set_truth(TrendCurve truth);

    /// Wires a loaded dataset in: profiles and initial opinions are sampled
    /// from records, the keyword rarity table is fed the tweet corpus, and
    /// the truth curve is kept for the report metrics.
    void attach_dataset(const Dataset& dataset);

    SimulationResult run();

    /// Post-run inspection of a core agent's accumulated memory graph.
    const MemoryGraph& memory(int agent) const { return memories_.at(agent); }

private:
    struct CoreOutcome {
        std::string text;
        double score = 0.0;
    };

    void prepare();
    std::vector<Message> initial_posts() const;
    Message make_numeric_post(int agent, double opinion, int step) const;
    CoreOutcome core_agent_step(int agent, int step, const std::vector<Message>& posts,
                                const std::vector<Message>& news);

    SimConfig config_;
    ProviderBundle providers_;
    GmpModel model_;

    std::optional<SocialGraph> graph_;
    std::vector<AgentProfile> profiles_;
    std::optional<Vector> initial_opinions_;
    std::optional<TrendCurve> truth_;

    Matrix static_latent_;
    std::vector<MemoryGraph> memories_;
    std::vector<int> memory_next_id_;
    Rng rng_{0};
};

void write_trend(const std::string& path, const TrendCurve& trend);
TrendCurve read_trend(const std::string& path);

std::string report_to_json(const SimulationReport& report);
void write_report(const std::string& path, const SimulationReport& report);

}  // namespace gasim
