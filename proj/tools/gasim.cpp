// gasim command-line interface: simulate, retrieve, train-gmp, eval-metrics
// and bench subcommands. File formats are documented in docs/formats.md.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "gasim/baselines.hpp"
#include "gasim/checkpoint.hpp"
#include "gasim/config.hpp"
#include "gasim/dataset.hpp"
#include "gasim/engine.hpp"
#include "gasim/gmp.hpp"
#include "gasim/gom.hpp"
#include "gasim/network.hpp"
#include "gasim/providers.hpp"
#include "gasim/remote.hpp"

namespace {

using namespace gasim;

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string part;
    while (std::getline(stream, part, sep)) parts.push_back(part);
    return parts;
}

Vector read_embedding_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        for (const auto& piece : split(token, ','))
            if (!piece.empty()) values.push_back(std::stod(piece));
    }
    if (values.empty()) throw Error("no values in " + path);
    Vector v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v(i) = values[i];
    return v;
}

struct MemoryDumpRecord {
    int id;
    double opinion;
    std::string content;
    Vector embedding;
};

/// Memory dump line: id <TAB> opinion <TAB> content <TAB> comma-separated reals.
std::vector<MemoryDumpRecord> read_memory_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<MemoryDumpRecord> records;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 4)
            throw Error(path + ":" + std::to_string(line_number) +
                        ": expected 4 tab-separated fields");
        MemoryDumpRecord r;
        r.id = std::stoi(fields[0]);
        r.opinion = std::stod(fields[1]);
        r.content = fields[2];
        const auto values = split(fields[3], ',');
        r.embedding = Vector(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) r.embedding(i) = std::stod(values[i]);
        const double norm = r.embedding.norm();
        if (norm > 0.0) r.embedding /= norm;
        records.push_back(std::move(r));
    }
    if (records.empty()) throw Error("no records in " + path);
    return records;
}

int cmd_simulate(const std::string& config_path, const std::string& truth_path,
                 const std::string& providers_kind, bool fallback_stub,
                 const std::string& out_dir) {
    SimConfig config = load_sim_config(config_path);

    ProviderBundle providers;
    if (providers_kind == "stub") {
        providers = make_stub_providers(config.providers);
    } else if (providers_kind == "remote") {
        providers = make_remote_providers(config.providers, config.providers.topic,
                                          fallback_stub);
    } else {
        throw Error("--providers must be 'stub' or 'remote'");
    }

    GmpParams params = config.gmp.checkpoint.empty()
                           ? GmpParams::init(config.gmp.profile_dim, config.gmp.depth,
                                             Rng(config.seed).derive(0x6A7))
                           : GmpParams::load(TensorFile::load(config.gmp.checkpoint));

    SimulationEngine engine(config, std::move(providers), std::move(params));
    if (!config.dataset.empty()) {
        const Dataset dataset = load_dataset(config.dataset, config.t_max);
        engine.attach_dataset(dataset);
    }
    if (!truth_path.empty()) engine.set_truth(read_trend(truth_path));

    const auto start = std::chrono::steady_clock::now();
    SimulationResult result = engine.run();
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::filesystem::create_directories(out_dir);
    write_report(out_dir + "/report.json", result.report);
    write_trend(out_dir + "/trend.txt", result.report.trend);

    std::cout << "simulated " << result.report.n_agents << " agents over "
              << result.report.t_max << " steps in " << elapsed << " s\n";
    std::cout << "trend mean " << result.report.trend.back() << " at final step\n";
    if (result.report.metrics) {
        const auto& m = *result.report.metrics;
        std::cout << "ΔBias: " << m.bias << "\nΔDiv: " << m.divergence
                  << "\nCorr.: " << m.correlation << "\nF.: " << m.frechet << "\n";
    }
    std::cout << "report: " << out_dir << "/report.json\n";
    return 0;
}

int cmd_retrieve(const std::string& memory_path, const std::string& query_path, int knn,
                 int top_r, double mu, double nu, double tau, int max_iters,
                 const std::string& out_path) {
    const auto records = read_memory_dump(memory_path);
    const Vector query_raw = read_embedding_file(query_path);
    const int dim = static_cast<int>(records.front().embedding.size());
    if (query_raw.size() != dim)
        throw Error("query dimension does not match the memory dump");
    Vector query = query_raw;
    const double qnorm = query.norm();
    if (qnorm > 0.0) query /= qnorm;

    RetrievalConfig config;
    config.knn = knn;
    config.top_r = top_r;
    config.nu = nu;
    config.tau = tau;
    config.max_iters = max_iters;
    // mu = lambda2 / (1 - lambda2 + lambda3) with lambda1 + lambda2 = 1 and
    // lambda3 held at its default, so lambda2 = mu (1 + lambda3) / (1 + mu).
    config.lambda2 = mu * (1.0 + config.lambda3) / (1.0 + mu);
    config.lambda1 = 1.0 - config.lambda2;
    config.validate();

    KeywordProvider keyworder(dim);
    for (const auto& r : records) keyworder.add_corpus_text(r.content);

    MemoryGraph graph(dim, config.knn);
    std::vector<MemoryNode> nodes;
    nodes.reserve(records.size());
    for (const auto& r : records) {
        MemoryNode node;
        node.node_id = r.id;
        node.content = r.content;
        node.content_embedding = r.embedding;
        node.keyword_embedding = keyworder.keyword_embedding(r.content);
        node.opinion = r.opinion;
        nodes.push_back(std::move(node));
    }
    graph.insert_batch(nodes);

    const RetrievalResult result = retrieve(graph, query, config);

    std::ostringstream text;
    text << "solver "
         << (result.solver == RetrievalSolver::kPropagation ? "propagation"
                                                            : "closed_form_fallback")
         << "\n";
    text << "iterations " << result.iterations_used << "\n";
    std::map<int, int> index_of;
    for (int i = 0; i < graph.size(); ++i) index_of[graph.node_id(i)] = i;
    text.precision(12);
    for (int id : result.selected)
        text << "selected " << id << " " << result.scores(index_of.at(id)) << "\n";

    if (out_path.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot open " + out_path);
        out << text.str();
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_train_gmp(const std::string& data_path, const std::string& out_path, int epochs,
                  double lr, double alpha, double beta, int clusters, std::uint64_t seed,
                  int window) {
    TrainingConfig training;
    training.epochs = epochs;
    training.learning_rate = lr;
    training.alpha = alpha;
    training.beta = beta;
    training.n_virtual_agents = clusters;
    training.seed = seed;
    training.train_window = window;
    training.validate();

    const Dataset dataset = load_dataset(data_path, training.train_window);
    Rng rng(seed);

    // Distinct users with their description and per-window observations.
    std::map<std::string, int> user_index;
    std::vector<std::string> descriptions;
    std::vector<std::map<int, std::pair<double, int>>> user_obs;  // window -> (sum, count)
    for (std::size_t r = 0; r < dataset.records.size(); ++r) {
        const auto& rec = dataset.records[r];
        auto [it, fresh] = user_index.try_emplace(rec.user_id,
                                                  static_cast<int>(descriptions.size()));
        if (fresh) {
            descriptions.push_back(rec.user_description);
            user_obs.emplace_back();
        }
        auto& slot = user_obs[it->second][dataset.record_window[r]];
        slot.first += rec.opinion_value;
        slot.second += 1;
    }
    const int n_users = static_cast<int>(descriptions.size());
    if (n_users < training.n_virtual_agents)
        throw Error("dataset has fewer users than requested clusters");

    const ProviderConfig provider_config;
    StubEmbedder profile_embedder(provider_config.profile_dim);
    Matrix user_embeddings(n_users, provider_config.profile_dim);
    for (int u = 0; u < n_users; ++u)
        user_embeddings.row(u) = profile_embedder.embed(descriptions[u]).transpose();

    std::cout << "clustering " << n_users << " users into " << training.n_virtual_agents
              << " virtual agents...\n";
    const KMeansResult kmeans =
        cluster_users(user_embeddings, training.n_virtual_agents, rng.derive(0xC1));

    // A virtual agent's observations are the union of its members', averaged
    // inside each window.
    SparseObservations observations(training.n_virtual_agents);
    std::vector<std::map<int, std::pair<double, int>>> merged(training.n_virtual_agents);
    for (int u = 0; u < n_users; ++u)
        for (const auto& [w, sum_count] : user_obs[u]) {
            auto& slot = merged[kmeans.assignments[u]][w];
            slot.first += sum_count.first;
            slot.second += sum_count.second;
        }
    for (int v = 0; v < training.n_virtual_agents; ++v) {
        for (const auto& [w, sum_count] : merged[v])
            observations[v].emplace_back(w, sum_count.first / sum_count.second);
        if (observations[v].empty())
            observations[v].emplace_back(0, 0.0);  // empty cluster: neutral anchor
    }

    const Matrix trajectories =
        interpolate_trajectories(observations, training.train_window, rng.derive(0xC2));
    const SocialGraph graph =
        generate_network(training.n_virtual_agents, rng.derive(0xC3));
    const Matrix phi_s = kmeans.centroids;

    GmpModel model(GmpParams::init(provider_config.profile_dim, 2, rng.derive(0xC4)));
    std::cout << "training for " << training.epochs << " epochs...\n";
    const std::vector<double> losses = train_gmp(model, trajectories, graph, phi_s, training);
    std::cout << "loss " << losses.front() << " -> " << losses.back() << "\n";

    TensorFile file;
    model.params().save(file);
    Vector loss_curve(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) loss_curve(i) = losses[i];
    file.put("training.loss", loss_curve);
    file.save(out_path);
    std::cout << "checkpoint: " << out_path << "\n";
    return 0;
}

int cmd_eval_metrics(const std::string& sim_path, const std::string& truth_path) {
    const TrendCurve sim = read_trend(sim_path);
    const TrendCurve truth = read_trend(truth_path);
    const TrendMetrics m = evaluate_trend(sim, truth);
    std::cout << "ΔBias: " << m.bias << "\n";
    std::cout << "ΔDiv: " << m.divergence << "\n";
    std::cout << "Corr.: " << m.correlation << "\n";
    std::cout << "F.: " << m.frechet << "\n";
    return 0;
}

int cmd_bench(const std::string& model_name, const std::string& agents, int steps, int trials,
              std::uint64_t seed, const std::string& out_path) {
    AbmConfig config;
    config.model = abm_model_from_string(model_name);

    std::vector<int> sizes;
    for (const auto& part : split(agents, ','))
        if (!part.empty()) sizes.push_back(std::stoi(part));
    if (sizes.empty()) throw Error("--agents must list at least one size");

    const int embed_dim = 384;
    const TextEmbedder embedder = [embed_dim](const std::string& text) {
        return stub_embed(text, embed_dim);
    };

    BenchReport best;
    for (int trial = 0; trial < std::max(1, trials); ++trial) {
        BenchReport report = bench_sequential(config, sizes, std::max(2, steps), embedder,
                                              embed_dim, seed + trial);
        if (trial == 0 ||
            report.abm_seconds_per_step.back() < best.abm_seconds_per_step.back())
            best = std::move(report);
    }

    write_bench_report(out_path, best);
    std::cout << "model " << best.model << "\n";
    for (std::size_t i = 0; i < best.sizes.size(); ++i) {
        std::cout << "n=" << best.sizes[i] << " sequential " << best.abm_seconds_per_step[i]
                  << " s/step, rule-only " << best.abm_rule_seconds_per_step[i]
                  << " s/step, batched GMP " << best.gmp_seconds_per_step[i]
                  << " s/step, speedup " << best.speedup_vs_gmp[i] << "x\n";
    }
    std::cout << "doubling ratio " << best.doubling_ratio << ", extrapolated "
              << best.extrapolated_hours_1m_agents_30_steps
              << " h for 1e6 agents x 30 steps\n";
    std::cout << "report: " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GASim: graph-accelerated hybrid opinion-dynamics simulator"};
    app.require_subcommand(1);

    // simulate
    std::string config_path, truth_path, providers_kind = "stub", out_dir = "out";
    bool fallback_stub = false;
    auto* simulate = app.add_subcommand("simulate", "run the full hybrid simulation");
    simulate->add_option("--config", config_path, "JSON config file")->required();
    simulate->add_option("--truth", truth_path, "ground-truth curve (one real per line)");
    simulate->add_option("--providers", providers_kind, "stub|remote")
        ->check(CLI::IsMember({"stub", "remote"}));
    simulate->add_flag("--fallback-stub", fallback_stub,
                       "fall back to stub providers on remote errors");
    simulate->add_option("--out", out_dir, "output directory")->required();

    // retrieve
    std::string memory_path, query_path, retrieve_out;
    int knn = 10, top_r = 5, max_iters = 20;
    double mu = 0.5, nu = 1.0, tau = 0.9;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "run memory retrieval on a dump");
    retrieve_cmd->add_option("--memory", memory_path, "memory dump file")->required();
    retrieve_cmd->add_option("--query", query_path, "query embedding file")->required();
    retrieve_cmd->add_option("--knn", knn, "kNN links per inserted memory");
    retrieve_cmd->add_option("--top-r", top_r, "memories to retrieve");
    retrieve_cmd->add_option("--mu", mu, "propagation mixing parameter");
    retrieve_cmd->add_option("--nu", nu, "convexity correction strength");
    retrieve_cmd->add_option("--tau", tau, "keyword threshold");
    retrieve_cmd->add_option("--max-iters", max_iters, "propagation iteration cap");
    retrieve_cmd->add_option("--out", retrieve_out, "output file (stdout when omitted)");

    // train-gmp
    std::string data_path, checkpoint_path;
    int epochs = 50, clusters = 1000, window = 10;
    double lr = 1e-3, alpha = 0.9, beta = 0.1;
    std::uint64_t train_seed = 0;
    auto* train = app.add_subcommand("train-gmp", "train the parallel opinion updater");
    train->add_option("--data", data_path, "dataset file (line-delimited JSON)")->required();
    train->add_option("--out", checkpoint_path, "checkpoint output path")->required();
    train->add_option("--epochs", epochs, "descent steps");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--alpha", alpha, "individual error weight");
    train->add_option("--beta", beta, "global error weight");
    train->add_option("--clusters", clusters, "virtual agent count");
    train->add_option("--seed", train_seed, "random seed");
    train->add_option("--window", window, "training window (time steps)");

    // eval-metrics
    std::string sim_curve, truth_curve;
    auto* eval = app.add_subcommand("eval-metrics", "compare two trend curves");
    eval->add_option("--sim", sim_curve, "simulated curve file")->required();
    eval->add_option("--truth", truth_curve, "ground-truth curve file")->required();

    // bench
    std::string bench_model = "hk", bench_agents = "1000,10000,100000",
                bench_out = "bench_report.json";
    int bench_steps = 3, bench_trials = 1;
    std::uint64_t bench_seed = 0;
    auto* bench = app.add_subcommand("bench", "sequential ABM vs batched GMP latency");
    bench->add_option("--model", bench_model, "hk|ra|lorenz");
    bench->add_option("--agents", bench_agents, "comma-separated population sizes");
    bench->add_option("--steps", bench_steps, "minimum measured steps per size");
    bench->add_option("--trials", bench_trials, "independent trials (best kept)");
    bench->add_option("--seed", bench_seed, "random seed");
    bench->add_option("--out", bench_out, "report output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed())
            return cmd_simulate(config_path, truth_path, providers_kind, fallback_stub, out_dir);
        if (retrieve_cmd->parsed())
            return cmd_retrieve(memory_path, query_path, knn, top_r, mu, nu, tau, max_iters,
                                retrieve_out);
        if (train->parsed())
            return cmd_train_gmp(data_path, checkpoint_path, epochs, lr, alpha, beta, clusters,
                                 train_seed, window);
        if (eval->parsed()) return cmd_eval_metrics(sim_curve, truth_curve);
        if (bench->parsed())
            return cmd_bench(bench_model, bench_agents, bench_steps, bench_trials, bench_seed,
                             bench_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
