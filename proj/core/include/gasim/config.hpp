#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gasim/types.hpp"

namespace gasim {

/// GOM retrieval hyperparameters. lambda1 + lambda2 = 1 is required by the
/// propagation solver's derivation and checked by validate(); mu is derived,
/// never stored.
struct RetrievalConfig {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double lambda3 = 0.5;
    double nu = 1.0;
    double tau = 0.9;
    int knn = 10;
    int max_iters = 20;
    double residual_tol = 1e-8;
    int top_r = 5;
    double degree_epsilon = 1e-6;

    double mu() const { return lambda2 / (1.0 - lambda2 + lambda3); }

    void validate() const;
};

struct GmpConfig {
    int profile_dim = 768;  // d_b
    int depth = 2;          // number of GAT layers
    std::string checkpoint;  // optional path to trained parameters

    void validate() const;
};

struct TrainingConfig {
    double alpha = 0.9;
    double beta = 0.1;
    double learning_rate = 1e-3;
    int epochs = 50;
    int train_window = 10;  // t_max_train
    int n_virtual_agents = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ProviderConfig {
    int embed_dim = 384;    // d_e
    int profile_dim = 768;  // d_b
    std::string endpoint;   // remote chat-completion endpoint, empty for stub-only
    std::string api_key_env = "GASIM_API_KEY";
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int max_inflight = 8;
    std::string templates_dir;
    std::string topic = "the current event";  // parameterizes the scorer template
};

struct SimConfig {
    int n_agents = 1000;
    int t_max = 30;
    int top_k_core = 100;   // K
    int entropy_bins = 10;  // B
    int entropy_window = 1; // W
    std::uint64_t seed = 0;
    std::string dataset;    // optional dataset path; empty means synthetic run
    std::vector<std::pair<int, std::string>> news_schedule;  // (step, news text)
    RetrievalConfig gom;
    GmpConfig gmp;
    TrainingConfig training;
    ProviderConfig providers;

    void validate() const;
};

/// Parses a JSON config document; unknown keys are rejected so typos fail
/// loudly. The parsed config is validated before being returned.
SimConfig load_sim_config(const std::string& path);
SimConfig parse_sim_config(const std::string& json_text);
std::string to_json(const SimConfig& config);

}  // namespace gasim
