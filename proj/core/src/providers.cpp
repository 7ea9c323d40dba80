#include "gasim/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace gasim {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

// FNV-1a; fixed constants keep embeddings identical everywhere.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void add_token(Vector& accum, const std::string& token) {
    const std::uint64_t h = fnv1a(token);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(accum.size()));
    const double sign = (h >> 63) ? 1.0 : -1.0;
    accum(bucket) += sign;
}

Vector normalized_or_zero(Vector v) {
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
}

}  // namespace

Vector stub_embed(const std::string& text, int dim) {
    Vector accum = Vector::Zero(dim);
    for (const auto& token : tokenize(text)) add_token(accum, token);
    return normalized_or_zero(std::move(accum));
}

void KeywordProvider::add_corpus_text(const std::string& text) {
    for (const auto& token : tokenize(text)) ++counts_[token];
}

std::vector<std::string> KeywordProvider::top_keywords(const std::string& text, int k) const {
    std::vector<std::string> tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

    // Rarest first: ascending corpus count, ties lexicographic (already the
    // secondary order after the sort above).
    std::stable_sort(tokens.begin(), tokens.end(), [this](const auto& a, const auto& b) {
        const auto ca = counts_.count(a) ? counts_.at(a) : 0;
        const auto cb = counts_.count(b) ? counts_.at(b) : 0;
        return ca < cb;
    });
    if (static_cast<int>(tokens.size()) > k) tokens.resize(k);
    return tokens;
}

Vector KeywordProvider::keyword_embedding(const std::string& text) const {
    Vector accum = Vector::Zero(dim_);
    for (const auto& token : top_keywords(text)) add_token(accum, token);
    return normalized_or_zero(std::move(accum));
}

double lexicon_score(const std::string& text) {
    static const std::unordered_map<std::string, double> kLexicon = {
        {"support", 0.8},    {"supportive", 0.8}, {"agree", 0.6},    {"great", 0.8},
        {"perfect", 1.0},    {"evil", -1.0},
        {"good", 0.5},       {"right", 0.4},      {"true", 0.4},     {"trust", 0.6},
        {"fair", 0.5},       {"hope", 0.4},       {"love", 0.9},     {"defend", 0.6},
        {"believe", 0.5},    {"excellent", 0.9},  {"proud", 0.7},    {"win", 0.5},
        {"oppose", -0.8},    {"against", -0.6},   {"disagree", -0.6}, {"bad", -0.5},
        {"wrong", -0.5},     {"false", -0.5},     {"fake", -0.7},    {"lie", -0.8},
        {"unfair", -0.6},    {"doubt", -0.4},     {"hate", -0.9},    {"attack", -0.6},
        {"terrible", -0.9},  {"corrupt", -0.8},   {"shame", -0.7},   {"lose", -0.5},
    };
    double sum = 0.0;
    int hits = 0;
    for (const auto& token : tokenize(text)) {
        auto it = kLexicon.find(token);
        if (it == kLexicon.end()) continue;
        sum += it->second;
        ++hits;
    }
    return hits == 0 ? 0.0 : sum / hits;
}

namespace {

constexpr const char* kStanceNames[3] = {"oppose", "neutral", "support"};

int stance_band(double opinion) {
    if (opinion > 1.0 / 3.0) return 2;
    if (opinion < -1.0 / 3.0) return 0;
    return 1;
}

double band_center(int band) { return (band - 1) * (2.0 / 3.0); }

}  // namespace

GenerationResult StubGenerator::generate(const AgentProfile& profile,
                                         std::span<const std::string> news,
                                         std::span<const MemorySnippet> memories,
                                         std::span<const Message* const> inbox,
                                         Rng& rng) const {
    double memory_mean = 0.0;
    if (!memories.empty()) {
        for (const auto& m : memories) memory_mean += m.opinion;
        memory_mean /= static_cast<double>(memories.size());
    }
    double inbox_mean = 0.0;
    if (!inbox.empty()) {
        for (const Message* m : inbox) inbox_mean += m->opinion.value();
        inbox_mean /= static_cast<double>(inbox.size());
    }
    const double bias = lexicon_score(profile.description);
    const double intended =
        OpinionValue::clamp(0.6 * memory_mean + 0.3 * inbox_mean + 0.1 * bias);

    const int band = stance_band(intended);
    const std::string topic =
        !memories.empty() && !memories.front().keyword.empty() ? memories.front().keyword
        : !news.empty()                                        ? "the latest news"
                                                               : "the discussion";
    static const char* kPhrasings[3] = {
        "My take on %TOPIC% stays the same.",
        "After reading my feed, %TOPIC% is on my mind.",
        "People keep talking about %TOPIC%.",
    };
    std::string body = kPhrasings[rng.uniform_int(3)];
    body.replace(body.find("%TOPIC%"), 7, topic);

    GenerationResult result;
    result.intended_opinion = intended;
    result.text = "[stance:" + std::string(kStanceNames[band]) + "] " + body;
    return result;
}

OpinionValue StubScorer::score(const std::string& text) const {
    const auto marker = text.find("[stance:");
    if (marker != std::string::npos) {
        const auto end = text.find(']', marker);
        if (end != std::string::npos) {
            const std::string name = text.substr(marker + 8, end - marker - 8);
            for (int band = 0; band < 3; ++band)
                if (name == kStanceNames[band]) return OpinionValue(band_center(band));
        }
    }
    return OpinionValue(lexicon_score(text));
}

ProviderBundle make_stub_providers(const ProviderConfig& config) {
    ProviderBundle bundle;
    bundle.embedder = std::make_shared<StubEmbedder>(config.embed_dim);
    bundle.profile_embedder = std::make_shared<StubEmbedder>(config.profile_dim);
    bundle.keyworder = std::make_shared<KeywordProvider>(config.embed_dim);
    bundle.generator = std::make_shared<StubGenerator>();
    bundle.scorer = std::make_shared<StubScorer>();
    return bundle;
}

}  // namespace gasim
