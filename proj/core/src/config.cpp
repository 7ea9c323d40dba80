#include "gasim/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gasim {

using nlohmann::json;

void RetrievalConfig::validate() const {
    if (lambda1 <= 0 || lambda2 <= 0 || lambda3 <= 0)
        throw Error("gom: lambda1, lambda2, lambda3 must be positive");
    if (std::abs(lambda1 + lambda2 - 1.0) > 1e-12)
        throw Error("gom: lambda1 + lambda2 must equal 1 for the propagation solver");
    if (nu < 1.0) throw Error("gom: nu must be >= 1");
    if (knn < 1) throw Error("gom: knn must be >= 1");
    if (max_iters < 1) throw Error("gom: max_iters must be >= 1");
    if (residual_tol <= 0) throw Error("gom: residual_tol must be positive");
    if (top_r < 1) throw Error("gom: top_r must be >= 1");
    if (degree_epsilon <= 0) throw Error("gom: degree_epsilon must be positive");
}

void GmpConfig::validate() const {
    if (profile_dim < 1) throw Error("gmp: profile_dim must be >= 1");
    if (depth < 1) throw Error("gmp: depth must be >= 1");
}

void TrainingConfig::validate() const {
    if (alpha < 0 || beta < 0) throw Error("training: alpha and beta must be >= 0");
    if (learning_rate <= 0) throw Error("training: learning_rate must be positive");
    if (epochs < 1) throw Error("training: epochs must be >= 1");
    if (train_window < 2) throw Error("training: train_window must be >= 2");
    if (n_virtual_agents < 1) throw Error("training: n_virtual_agents must be >= 1");
}

void SimConfig::validate() const {
    if (n_agents < 1) throw Error("config: n_agents must be >= 1");
    if (t_max < 1) throw Error("config: t_max must be >= 1");
    if (top_k_core < 1 || top_k_core > n_agents)
        throw Error("config: top_k_core must satisfy 0 < K <= n_agents");
    if (entropy_bins < 2) throw Error("config: entropy_bins must be >= 2");
    if (entropy_window < 1) throw Error("config: entropy_window must be >= 1");
    for (const auto& [step, text] : news_schedule) {
        if (step < 1 || step >= t_max)
            throw Error("config: news_schedule step out of simulated range");
        if (text.empty()) throw Error("config: news_schedule entry with empty text");
    }
    gom.validate();
    gmp.validate();
    training.validate();
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& scope) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) { ok = true; break; }
        if (!ok) throw Error("config: unknown key '" + scope + key + "'");
    }
}

template <typename T>
void get_if_present(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

RetrievalConfig parse_gom(const json& obj) {
    reject_unknown_keys(obj,
                        {"lambda1", "lambda2", "lambda3", "nu", "tau", "knn", "max_iters",
                         "residual_tol", "top_r", "degree_epsilon"},
                        "gom.");
    RetrievalConfig c;
    get_if_present(obj, "lambda1", c.lambda1);
    get_if_present(obj, "lambda2", c.lambda2);
    get_if_present(obj, "lambda3", c.lambda3);
    get_if_present(obj, "nu", c.nu);
    get_if_present(obj, "tau", c.tau);
    get_if_present(obj, "knn", c.knn);
    get_if_present(obj, "max_iters", c.max_iters);
    get_if_present(obj, "residual_tol", c.residual_tol);
    get_if_present(obj, "top_r", c.top_r);
    get_if_present(obj, "degree_epsilon", c.degree_epsilon);
    return c;
}

GmpConfig parse_gmp(const json& obj) {
    reject_unknown_keys(obj, {"profile_dim", "depth", "checkpoint"}, "gmp.");
    GmpConfig c;
    get_if_present(obj, "profile_dim", c.profile_dim);
    get_if_present(obj, "depth", c.depth);
    get_if_present(obj, "checkpoint", c.checkpoint);
    return c;
}

TrainingConfig parse_training(const json& obj) {
    reject_unknown_keys(obj,
                        {"alpha", "beta", "learning_rate", "epochs", "train_window",
                         "n_virtual_agents", "seed"},
                        "training.");
    TrainingConfig c;
    get_if_present(obj, "alpha", c.alpha);
    get_if_present(obj, "beta", c.beta);
    get_if_present(obj, "learning_rate", c.learning_rate);
    get_if_present(obj, "epochs", c.epochs);
    get_if_present(obj, "train_window", c.train_window);
    get_if_present(obj, "n_virtual_agents", c.n_virtual_agents);
    get_if_present(obj, "seed", c.seed);
    return c;
}

ProviderConfig parse_providers(const json& obj) {
    reject_unknown_keys(obj,
                        {"embed_dim", "profile_dim", "endpoint", "api_key_env",
                         "timeout_seconds", "max_retries", "max_inflight", "templates_dir",
                         "topic"},
                        "providers.");
    ProviderConfig c;
    get_if_present(obj, "embed_dim", c.embed_dim);
    get_if_present(obj, "profile_dim", c.profile_dim);
    get_if_present(obj, "endpoint", c.endpoint);
    get_if_present(obj, "api_key_env", c.api_key_env);
    get_if_present(obj, "timeout_seconds", c.timeout_seconds);
    get_if_present(obj, "max_retries", c.max_retries);
    get_if_present(obj, "max_inflight", c.max_inflight);
    get_if_present(obj, "templates_dir", c.templates_dir);
    get_if_present(obj, "topic", c.topic);
    return c;
}

}  // namespace

SimConfig parse_sim_config(const std::string& json_text) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown_keys(obj,
                        {"n_agents", "t_max", "top_k_core", "entropy_bins", "entropy_window",
                         "seed", "dataset", "news_schedule", "gom", "gmp", "training",
                         "providers"},
                        "");
    SimConfig c;
    get_if_present(obj, "n_agents", c.n_agents);
    get_if_present(obj, "t_max", c.t_max);
    get_if_present(obj, "top_k_core", c.top_k_core);
    get_if_present(obj, "entropy_bins", c.entropy_bins);
    get_if_present(obj, "entropy_window", c.entropy_window);
    get_if_present(obj, "seed", c.seed);
    get_if_present(obj, "dataset", c.dataset);
    if (auto it = obj.find("news_schedule"); it != obj.end()) {
        for (const auto& entry : *it) {
            if (!entry.is_array() || entry.size() != 2)
                throw Error("config: news_schedule entries must be [step, text] pairs");
            c.news_schedule.emplace_back(entry[0].get<int>(), entry[1].get<std::string>());
        }
    }
    if (auto it = obj.find("gom"); it != obj.end()) c.gom = parse_gom(*it);
    if (auto it = obj.find("gmp"); it != obj.end()) c.gmp = parse_gmp(*it);
    if (auto it = obj.find("training"); it != obj.end()) c.training = parse_training(*it);
    if (auto it = obj.find("providers"); it != obj.end()) c.providers = parse_providers(*it);
    c.validate();
    return c;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_sim_config(buf.str());
}

std::string to_json(const SimConfig& c) {
    json news = json::array();
    for (const auto& [step, text] : c.news_schedule) news.push_back({step, text});
    json obj = {
        {"n_agents", c.n_agents},
        {"t_max", c.t_max},
        {"top_k_core", c.top_k_core},
        {"entropy_bins", c.entropy_bins},
        {"entropy_window", c.entropy_window},
        {"seed", c.seed},
        {"dataset", c.dataset},
        {"news_schedule", news},
        {"gom",
         {{"lambda1", c.gom.lambda1},
          {"lambda2", c.gom.lambda2},
          {"lambda3", c.gom.lambda3},
          {"nu", c.gom.nu},
          {"tau", c.gom.tau},
          {"knn", c.gom.knn},
          {"max_iters", c.gom.max_iters},
          {"residual_tol", c.gom.residual_tol},
          {"top_r", c.gom.top_r},
          {"degree_epsilon", c.gom.degree_epsilon}}},
        {"gmp",
         {{"profile_dim", c.gmp.profile_dim},
          {"depth", c.gmp.depth},
          {"checkpoint", c.gmp.checkpoint}}},
        {"training",
         {{"alpha", c.training.alpha},
          {"beta", c.training.beta},
          {"learning_rate", c.training.learning_rate},
          {"epochs", c.training.epochs},
          {"train_window", c.training.train_window},
          {"n_virtual_agents", c.training.n_virtual_agents},
          {"seed", c.training.seed}}},
        {"providers",
         {{"embed_dim", c.providers.embed_dim},
          {"profile_dim", c.providers.profile_dim},
          {"endpoint", c.providers.endpoint},
          {"api_key_env", c.providers.api_key_env},
          {"timeout_seconds", c.providers.timeout_seconds},
          {"max_retries", c.providers.max_retries},
          {"max_inflight", c.providers.max_inflight},
          {"templates_dir", c.providers.templates_dir},
          {"topic", c.providers.topic}}},
    };
    return obj.dump(2);
}

}  // namespace gasim
