#include "gasim/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gasim/network.hpp"
#include "gasim/parallel.hpp"

namespace gasim {

namespace {

// Neutral vocabulary for synthesized profiles; none of these words carry
// lexicon valence, so synthetic populations start bias-free.
constexpr const char* kRoles[] = {"engineer", "teacher", "nurse",   "designer",
                                  "farmer",   "student", "analyst", "musician"};
constexpr const char* kInterests[] = {"cycling",     "gardening", "chess",  "astronomy",
                                      "photography", "cooking",   "hiking", "history"};

std::string stance_text(int agent, double opinion) {
    const char* band = opinion > 1.0 / 3.0 ? "support" : opinion < -1.0 / 3.0 ? "oppose"
                                                                              : "neutral";
    char text[96];
    std::snprintf(text, sizeof(text), "[stance:%s] agent %d shares a %s view (%+.3f)", band,
                  agent, band, opinion);
    return text;
}

}  // namespace

std::vector<int> centrality_sample_steps(int executed_steps) {
    std::vector<int> steps;
    for (int s : {1, 5, 10, 15, 20, 25, 30})
        if (s >= 1 && s <= executed_steps) steps.push_back(s);
    return steps;
}

CentralityTable core_centrality_report(const std::vector<PartitionSummary>& partitions,
                                       const SocialGraph& graph,
                                       const std::vector<int>& sampled_steps) {
    const int n = graph.n_agents();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (graph.in_degree(a) != graph.in_degree(b))
            return graph.in_degree(a) < graph.in_degree(b);
        return a < b;
    });
    std::vector<double> quantile(n);
    for (int r = 0; r < n; ++r) quantile[order[r]] = static_cast<double>(r) / n;

    CentralityTable table;
    double share_sum = 0.0;
    for (int step : sampled_steps) {
        const auto it = std::find_if(partitions.begin(), partitions.end(),
                                     [step](const auto& p) { return p.step == step; });
        if (it == partitions.end()) continue;
        CentralityRow row;
        row.step = step;
        for (int agent : it->core_ids) {
            const double q = quantile[agent];
            if (q >= 0.8) ++row.ge_p80;
            else if (q >= 0.6) ++row.p60_80;
            else if (q >= 0.4) ++row.p40_60;
            else ++row.lt_p40;
        }
        const int k = static_cast<int>(it->core_ids.size());
        row.top20_share = k > 0 ? static_cast<double>(row.ge_p80) / k : 0.0;
        share_sum += row.top20_share;
        table.rows.push_back(row);
    }
    table.mean_top20_share = table.rows.empty() ? 0.0 : share_sum / table.rows.size();
    return table;
}

SimulationEngine::SimulationEngine(SimConfig config, ProviderBundle providers,
                                   GmpParams gmp_params)
    : config_(std::move(config)),
      providers_(std::move(providers)),
      model_(std::move(gmp_params)),
      rng_(0) {
    config_.validate();
    if (model_.params().profile_dim() != config_.providers.profile_dim)
        throw Error("SimulationEngine: GMP profile_dim does not match the provider bundle");
    rng_ = Rng(config_.seed);
}

void SimulationEngine::set_graph(SocialGraph graph) {
    if (graph.n_agents() != config_.n_agents)
        throw Error("SimulationEngine::set_graph: population size mismatch");
    graph_ = std::move(graph);
}

void SimulationEngine::set_profiles(std::vector<AgentProfile> profiles) {
    if (static_cast<int>(profiles.size()) != config_.n_agents)
        throw Error("SimulationEngine::set_profiles: population size mismatch");
    profiles_ = std::move(profiles);
}

void SimulationEngine::set_initial_opinions(Vector opinions) {
    if (opinions.size() != config_.n_agents)
        throw Error("SimulationEngine::set_initial_opinions: population size mismatch");
    for (Eigen::Index i = 0; i < opinions.size(); ++i)
        opinions(i) = OpinionValue::clamp(opinions(i));
    initial_opinions_ = std::move(opinions);
}

void SimulationEngine::set_truth(TrendCurve truth) { truth_ = std::move(truth); }

void SimulationEngine::attach_dataset(const Dataset& dataset) {
    for (const auto& r : dataset.records) providers_.keyworder->add_corpus_text(r.tweet_content);

    // Profiles sampled from the dataset's users (with replacement when the
    // population is larger than the dataset).
    std::vector<const DatasetRecord*> by_user;
    by_user.reserve(dataset.records.size());
    std::unordered_map<std::string, bool> seen;
    for (const auto& r : dataset.records)
        if (!seen[r.user_id]) {
            seen[r.user_id] = true;
            by_user.push_back(&r);
        }
    Rng sampler = rng_.derive(0xDA7A);
    std::vector<AgentProfile> profiles(config_.n_agents);
    for (int i = 0; i < config_.n_agents; ++i) {
        const DatasetRecord& r = *by_user[sampler.uniform_int(by_user.size())];
        profiles[i].agent_id = i;
        profiles[i].description = r.user_description;
        profiles[i].follower_count = r.follower_count;
        profiles[i].following_count = r.following_count;
    }
    set_profiles(std::move(profiles));

    // Initial opinions drawn from the first time window.
    std::vector<double> window0;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        if (dataset.record_window[i] == 0) window0.push_back(dataset.records[i].opinion_value);
    if (window0.empty()) window0.push_back(dataset.truth.front());
    Vector initial(config_.n_agents);
    for (int i = 0; i < config_.n_agents; ++i)
        initial(i) = window0[sampler.uniform_int(window0.size())];
    set_initial_opinions(std::move(initial));

    set_truth(dataset.truth);
}

void SimulationEngine::prepare() {
    if (!graph_) graph_ = generate_network(config_.n_agents, rng_.derive(0x6E7));

    if (profiles_.empty()) {
        profiles_.resize(config_.n_agents);
        Rng prof_rng = rng_.derive(0x905);
        for (int i = 0; i < config_.n_agents; ++i) {
            auto& p = profiles_[i];
            p.agent_id = i;
            const char* role = kRoles[prof_rng.uniform_int(std::size(kRoles))];
            const char* a = kInterests[prof_rng.uniform_int(std::size(kInterests))];
            const char* b = kInterests[prof_rng.uniform_int(std::size(kInterests))];
            p.description = std::string(role) + " interested in " + a + " and " + b;
            p.follower_count = graph_->in_degree(i);
            p.following_count = 0;
        }
        for (const auto& e : graph_->follow_edges()) ++profiles_[e.follower].following_count;
    }

    Matrix phi_s(config_.n_agents, config_.providers.profile_dim);
    parallel_for(config_.n_agents, [&](int i) {
        profiles_[i].profile_embedding = providers_.profile_embedder->embed(profiles_[i].description);
        phi_s.row(i) = profiles_[i].profile_embedding.transpose();
    });
    static_latent_ = model_.static_latent(phi_s);

    if (!initial_opinions_) {
        Rng init_rng = rng_.derive(0x171);
        Vector initial(config_.n_agents);
        for (int i = 0; i < config_.n_agents; ++i)
            initial(i) = OpinionValue::clamp(init_rng.normal(0.0, 0.3));
        initial_opinions_ = std::move(initial);
    }

    memories_.clear();
    memories_.reserve(config_.n_agents);
    for (int i = 0; i < config_.n_agents; ++i)
        memories_.emplace_back(config_.providers.embed_dim, config_.gom.knn);
    memory_next_id_.assign(config_.n_agents, 0);
}

Message SimulationEngine::make_numeric_post(int agent, double opinion, int step) const {
    Message post;
    post.author_id = agent;
    post.content = stance_text(agent, opinion);
    post.content_embedding = providers_.embedder->embed(post.content);
    post.keyword_embedding = providers_.keyworder->keyword_embedding(post.content);
    post.opinion = opinion;
    post.step = step;
    return post;
}

SimulationEngine::CoreOutcome SimulationEngine::core_agent_step(
    int agent, int step, const std::vector<Message>& posts,
    const std::vector<Message>& news) {
    // Observe: this step's inbox is the neighbors' previous posts plus any
    // broadcast news. Neighbor messages become memories; news stays context.
    std::vector<const Message*> inbox;
    const auto nbrs = graph_->neighbors(agent);
    inbox.reserve(nbrs.size() + news.size());
    for (int j : nbrs) inbox.push_back(&posts[j]);

    std::vector<MemoryNode> fresh;
    fresh.reserve(nbrs.size());
    for (const Message* m : inbox) {
        MemoryNode node;
        node.node_id = memory_next_id_[agent]++;
        node.content = m->content;
        node.content_embedding = m->content_embedding;
        node.keyword_embedding = m->keyword_embedding;
        node.opinion = m->opinion;
        node.step_created = m->step;
        fresh.push_back(std::move(node));
    }
    memories_[agent].insert_batch(fresh);

    for (const Message& m : news) inbox.push_back(&m);

    // Recall: query = normalized mean of inbox content embeddings.
    std::vector<MemorySnippet> snippets;
    if (!inbox.empty() && memories_[agent].size() > 0) {
        Vector query = Vector::Zero(config_.providers.embed_dim);
        for (const Message* m : inbox) query += m->content_embedding;
        const double norm = query.norm();
        if (norm > 0.0) query /= norm;
        const RetrievalResult retrieved = retrieve(memories_[agent], query, config_.gom);
        snippets.reserve(retrieved.selected.size());
        for (int node_id : retrieved.selected) {
            // Node ids are assigned densely per agent, so the id is the index.
            MemorySnippet s;
            s.content = memories_[agent].content(node_id);
            s.opinion = memories_[agent].opinion(node_id);
            const auto keywords = providers_.keyworder->top_keywords(s.content, 1);
            if (!keywords.empty()) s.keyword = keywords.front();
            snippets.push_back(std::move(s));
        }
    }

    // Act: generate text, then score it onto the opinion scale.
    std::vector<std::string> news_texts;
    news_texts.reserve(news.size());
    for (const Message& m : news) news_texts.push_back(m.content);

    Rng agent_rng = rng_.derive(static_cast<std::uint64_t>(step),
                                static_cast<std::uint64_t>(agent));
    const GenerationResult generated = providers_.generator->generate(
        profiles_[agent], news_texts, snippets, inbox, agent_rng);

    CoreOutcome outcome;
    outcome.text = generated.text;
    outcome.score = providers_.scorer->score(generated.text).value();
    return outcome;
}

SimulationResult SimulationEngine::run() {
    prepare();

    SimulationResult result;
    OpinionState& state = result.state;
    state.reset(Matrix(*initial_opinions_));

    // Posts composed at step t are perceived at step t+1.
    std::vector<Message> posts(config_.n_agents);
    parallel_for(config_.n_agents, [&](int i) {
        posts[i] = make_numeric_post(i, state.history()(i, 0), 0);
    });

    std::vector<PartitionSummary> partitions;
    for (int step = 1; step < config_.t_max; ++step) {
        // Grouping happens on the fully committed history.
        const Vector entropy = neighborhood_entropy(state, *graph_, config_.entropy_bins,
                                                    config_.entropy_window);
        const Partition partition = partition_agents(entropy, config_.top_k_core);

        PartitionSummary summary;
        summary.step = step;
        summary.core_ids = partition.core_ids;
        for (int id : partition.core_ids) summary.mean_core_entropy += entropy(id);
        if (!partition.core_ids.empty())
            summary.mean_core_entropy /= static_cast<double>(partition.core_ids.size());
        partitions.push_back(summary);

        // Scheduled news: broadcast into every inbox and handed to generators.
        std::vector<Message> news;
        for (const auto& [news_step, text] : config_.news_schedule) {
            if (news_step != step) continue;
            Message m;
            m.author_id = -1;
            m.content = text;
            m.content_embedding = providers_.embedder->embed(text);
            m.keyword_embedding = providers_.keyworder->keyword_embedding(text);
            m.opinion = providers_.scorer->score(text);
            m.step = step;
            news.push_back(std::move(m));
        }

        // Core pipeline, parallel across agents: independent memory graphs,
        // per-(step, agent) random streams, per-agent output slots.
        const int k = static_cast<int>(partition.core_ids.size());
        std::vector<CoreOutcome> outcomes(k);
        parallel_for(k, [&](int c) {
            outcomes[c] = core_agent_step(partition.core_ids[c], step, posts, news);
        });

        // One batched update for everyone, then the scored core opinions
        // override their slots.
        Vector column = model_.forward_cached_static(state.history(), *graph_, static_latent_);
        for (int c = 0; c < k; ++c) {
            const int agent = partition.core_ids[c];
            column(agent) = outcomes[c].score;
            result.core_scores[{step, agent}] = outcomes[c].score;
            result.core_texts[{step, agent}] = outcomes[c].text;
        }
        state.append_column(column);

        // Compose this step's posts for perception at step + 1.
        parallel_for(config_.n_agents, [&](int i) {
            posts[i] = make_numeric_post(i, state.history()(i, step), step);
        });
        for (int c = 0; c < k; ++c) {
            const int agent = partition.core_ids[c];
            Message post;
            post.author_id = agent;
            post.content = outcomes[c].text;
            post.content_embedding = providers_.embedder->embed(post.content);
            post.keyword_embedding = providers_.keyworder->keyword_embedding(post.content);
            post.opinion = outcomes[c].score;
            post.step = step;
            posts[agent] = std::move(post);
        }
    }

    SimulationReport& report = result.report;
    report.n_agents = config_.n_agents;
    report.t_max = config_.t_max;
    report.top_k_core = config_.top_k_core;
    report.seed = config_.seed;
    report.partitions = std::move(partitions);
    report.trend.resize(config_.t_max);
    for (int t = 0; t < config_.t_max; ++t) report.trend[t] = state.history().col(t).mean();
    if (truth_) report.metrics = evaluate_trend(report.trend, *truth_);
    report.centrality = core_centrality_report(
        report.partitions, *graph_, centrality_sample_steps(config_.t_max - 1));
    return result;
}

void write_trend(const std::string& path, const TrendCurve& trend) {
    std::ofstream out(path);
    if (!out) throw Error("write_trend: cannot open " + path);
    out.precision(17);
    for (double v : trend) out << v << "\n";
}

TrendCurve read_trend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_trend: cannot open " + path);
    TrendCurve curve;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            curve.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw Error("read_trend: " + path + ":" + std::to_string(line_number) +
                        ": not a real number");
        }
    }
    if (curve.empty()) throw Error("read_trend: " + path + " is empty");
    return curve;
}

std::string report_to_json(const SimulationReport& report) {
    nlohmann::json partitions = nlohmann::json::array();
    for (const auto& p : report.partitions) {
        partitions.push_back({{"step", p.step},
                              {"core_ids", p.core_ids},
                              {"mean_core_entropy", p.mean_core_entropy}});
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.centrality.rows) {
        rows.push_back({{"step", r.step},
                        {"ge_p80", r.ge_p80},
                        {"p60_80", r.p60_80},
                        {"p40_60", r.p40_60},
                        {"lt_p40", r.lt_p40},
                        {"top20_share", r.top20_share}});
    }
    nlohmann::json doc = {
        {"n_agents", report.n_agents},
        {"t_max", report.t_max},
        {"top_k_core", report.top_k_core},
        {"seed", report.seed},
        {"trend", report.trend},
        {"partitions", partitions},
        {"centrality",
         {{"rows", rows}, {"mean_top20_share", report.centrality.mean_top20_share}}},
    };
    if (report.metrics) {
        doc["metrics"] = {{"delta_bias", report.metrics->bias},
                          {"delta_div", report.metrics->divergence},
                          {"corr", report.metrics->correlation},
                          {"frechet", report.metrics->frechet}};
    } else {
        doc["metrics"] = nullptr;
    }
    return doc.dump(2);
}

void write_report(const std::string& path, const SimulationReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("write_report: cannot open " + path);
    out << report_to_json(report) << "\n";
}

}  // namespace gasim
