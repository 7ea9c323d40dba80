#include "gasim/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gasim/gmp.hpp"
#include "gasim/network.hpp"

namespace gasim {

AbmModel abm_model_from_string(const std::string& name) {
    if (name == "hk" || name == "HK") return AbmModel::kHK;
    if (name == "ra" || name == "RA") return AbmModel::kRA;
    if (name == "lorenz" || name == "Lorenz") return AbmModel::kLorenz;
    throw Error("unknown ABM model '" + name + "' (expected hk, ra or lorenz)");
}

std::string to_string(AbmModel model) {
    switch (model) {
        case AbmModel::kHK: return "hk";
        case AbmModel::kRA: return "ra";
        case AbmModel::kLorenz: return "lorenz";
    }
    return "unknown";
}

void AbmConfig::validate() const {
    if (confidence_epsilon <= 0.0 || confidence_epsilon > 2.0)
        throw Error("abm: confidence_epsilon must be in (0, 2]");
    if (convergence_mu <= 0.0 || convergence_mu > 0.5)
        throw Error("abm: convergence_mu must be in (0, 0.5]");
    if (uncertainty <= 0.0) throw Error("abm: uncertainty must be positive");
    if (lorenz.assimilation_threshold <= 0.0 || lorenz.contrast_threshold <= 0.0)
        throw Error("abm: lorenz thresholds must be positive");
}

namespace {

double update_hk(double self, std::span<const double> neighbor_opinions, double epsilon) {
    double sum = self;  // self is always within its own confidence bound
    int count = 1;
    for (double o : neighbor_opinions) {
        if (std::abs(o - self) <= epsilon) {
            sum += o;
            ++count;
        }
    }
    return sum / count;
}

double update_ra(double self, std::span<const double> neighbor_opinions,
                 const AbmConfig& config, Rng& rng) {
    if (neighbor_opinions.empty()) return self;
    const double other =
        neighbor_opinions[rng.uniform_int(neighbor_opinions.size())];
    const double u = config.uncertainty;
    const double overlap = std::min(self + u, other + u) - std::max(self - u, other - u);
    if (overlap <= u) return self;
    return self + config.convergence_mu * (overlap / u - 1.0) * (other - self);
}

double update_lorenz(double self, std::span<const double> neighbor_opinions,
                     const LorenzParams& p) {
    if (neighbor_opinions.empty()) return self;
    double shift = 0.0;
    for (double o : neighbor_opinions) {
        const double d = o - self;
        if (std::abs(d) <= p.assimilation_threshold) {
            shift += p.assimilation_strength * d;
        } else if (std::abs(d) >= p.contrast_threshold) {
            shift -= p.contrast_strength * d;
        }
    }
    return self + shift / static_cast<double>(neighbor_opinions.size());
}

double apply_rule(const AbmConfig& config, double self,
                  std::span<const double> neighbor_opinions, Rng& rng) {
    double next = self;
    switch (config.model) {
        case AbmModel::kHK:
            next = update_hk(self, neighbor_opinions, config.confidence_epsilon);
            break;
        case AbmModel::kRA:
            next = update_ra(self, neighbor_opinions, config, rng);
            break;
        case AbmModel::kLorenz:
            next = update_lorenz(self, neighbor_opinions, config.lorenz);
            break;
    }
    return OpinionValue::clamp(next);
}

}  // namespace

Vector abm_step(const AbmConfig& config, const OpinionState& state, const SocialGraph& graph,
                Rng& rng) {
    if (state.step() < 1) throw Error("abm_step: state has no committed steps");
    if (state.n_agents() != graph.n_agents())
        throw Error("abm_step: state and graph disagree on population size");

    const Vector current = state.history().col(state.step() - 1);
    Vector next(current.size());
    std::vector<double> scratch;
    for (int i = 0; i < graph.n_agents(); ++i) {  // deliberately sequential
        const auto nbrs = graph.neighbors(i);
        scratch.clear();
        scratch.reserve(nbrs.size());
        for (int j : nbrs) scratch.push_back(current(j));
        next(i) = apply_rule(config, current(i), scratch, rng);
    }
    return next;
}

Matrix run_abm(const AbmConfig& config, const Vector& initial, const SocialGraph& graph,
               int steps, Rng rng) {
    config.validate();
    OpinionState state{Matrix(initial)};
    for (int s = 0; s < steps; ++s) state.append_column(abm_step(config, state, graph, rng));
    return state.history();
}

// ---------------------------------------------------------------------------
// Latency benchmark
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// One sequential framework step: every agent, in id order, composes its post
/// (text + embeddings), then every agent gathers its neighbors' posts into a
/// private inbox and applies the attitude update to what it received. This is
/// the per-agent message machinery a hybrid framework runs for ordinary
/// agents; the update rule alone is timed separately for comparison.
Vector framework_step(const AbmConfig& config, const Vector& current,
                      const SocialGraph& graph, const TextEmbedder& embedder, int step,
                      Rng& rng) {
    const int n = graph.n_agents();
    std::vector<Message> posts(n);
    for (int i = 0; i < n; ++i) {
        Message post;
        post.author_id = i;
        char text[64];
        std::snprintf(text, sizeof(text), "agent %d reports stance %+.3f", i,
                      current(i));
        post.content = text;
        post.content_embedding = embedder(post.content);
        post.keyword_embedding = post.content_embedding;
        post.opinion = current(i);
        post.step = step;
        posts[i] = std::move(post);
    }

    Vector next(n);
    std::vector<double> opinions;
    for (int i = 0; i < n; ++i) {
        const auto nbrs = graph.neighbors(i);
        std::vector<Message> inbox;  // each agent receives its own payload copies
        inbox.reserve(nbrs.size());
        for (int j : nbrs) inbox.push_back(posts[j]);
        opinions.clear();
        opinions.reserve(inbox.size());
        for (const Message& m : inbox) opinions.push_back(m.opinion.value());
        next(i) = apply_rule(config, current(i), opinions, rng);
    }
    return next;
}

template <typename StepFn>
double time_per_step(StepFn&& step, int min_trials) {
    step();  // warmup
    int trials = 0;
    const auto start = Clock::now();
    double elapsed = 0.0;
    while (trials < min_trials || elapsed < 0.2) {
        step();
        ++trials;
        elapsed = seconds_since(start);
        if (elapsed > 5.0) break;
    }
    return elapsed / trials;
}

}  // namespace

BenchReport bench_sequential(const AbmConfig& config, const std::vector<int>& sizes,
                             int trials, const TextEmbedder& embedder, int embed_dim,
                             std::uint64_t seed) {
    config.validate();
    if (sizes.empty()) throw Error("bench_sequential: no sizes given");
    (void)embed_dim;

    BenchReport report;
    report.model = to_string(config.model);
    report.sizes = sizes;
    report.seed = seed;
    Rng rng(seed);

    GmpParams params = GmpParams::init(16, 2, rng.derive(1));
    GmpModel model(std::move(params));

    for (int n : sizes) {
        const SocialGraph graph = generate_network(n, rng.derive(2, n));
        Rng init_rng = rng.derive(3, n);
        Matrix history(n, 2);
        for (int i = 0; i < n; ++i) {
            history(i, 0) = OpinionValue::clamp(init_rng.normal(0.0, 0.3));
            history(i, 1) = OpinionValue::clamp(init_rng.normal(0.0, 0.3));
        }
        const Vector current = history.col(1);

        Rng abm_rng = rng.derive(4, n);
        const double framework = time_per_step(
            [&] { framework_step(config, current, graph, embedder, 0, abm_rng); }, trials);

        OpinionState state(history);
        Rng rule_rng = rng.derive(5, n);
        const double rule_only =
            time_per_step([&] { abm_step(config, state, graph, rule_rng); }, trials);

        // Batched GMP step with the static latent cached, exactly as the
        // engine runs it once per simulation step.
        const Matrix static_latent = Matrix::Zero(n, 64);
        const double gmp = time_per_step(
            [&] { model.forward_cached_static(history, graph, static_latent); }, trials);

        report.abm_seconds_per_step.push_back(framework);
        report.abm_rule_seconds_per_step.push_back(rule_only);
        report.gmp_seconds_per_step.push_back(gmp);
        report.speedup_vs_gmp.push_back(framework / gmp);
    }

    // Log-log least squares over the framework loop.
    const int m = static_cast<int>(sizes.size());
    if (m >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < m; ++i) {
            const double x = std::log(static_cast<double>(sizes[i]));
            const double y = std::log(report.abm_seconds_per_step[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        report.fitted_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    } else {
        report.fitted_exponent = 1.0;
    }
    report.doubling_ratio = std::pow(2.0, report.fitted_exponent);

    // Linear-in-n extrapolation anchored at the largest measured size.
    const double per_agent =
        report.abm_seconds_per_step.back() / static_cast<double>(sizes.back());
    report.extrapolated_hours_1m_agents_30_steps = per_agent * 1e6 * 30.0 / 3600.0;
    return report;
}

void write_bench_report(const std::string& path, const BenchReport& report) {
    nlohmann::json doc = {
        {"model", report.model},
        {"seed", report.seed},
        {"sizes", report.sizes},
        {"abm_seconds_per_step", report.abm_seconds_per_step},
        {"abm_rule_seconds_per_step", report.abm_rule_seconds_per_step},
        {"gmp_seconds_per_step", report.gmp_seconds_per_step},
        {"speedup_vs_gmp", report.speedup_vs_gmp},
        {"fitted_exponent", report.fitted_exponent},
        {"doubling_ratio", report.doubling_ratio},
        {"extrapolated_hours_1m_agents_30_steps",
         report.extrapolated_hours_1m_agents_30_steps},
    };
    std::ofstream out(path);
    if (!out) throw Error("write_bench_report: cannot open " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace gasim
