#pragma once

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gasim/config.hpp"
#include "gasim/rng.hpp"
#include "gasim/types.hpp"

namespace gasim {

/// Text -> deterministic unit embedding (or the zero vector for empty text).
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual int dim() const = 0;
    virtual Vector embed(const std::string& text) const = 0;
};

/// A retrieved memory as handed to the generator: content, its opinion and
/// the memory's leading keyword.
struct MemorySnippet {
    std::string content;
    double opinion = 0.0;
    std::string keyword;
};

struct GenerationResult {
    std::string text;
    double intended_opinion = 0.0;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual GenerationResult generate(const AgentProfile& profile,
                                      std::span<const std::string> news,
                                      std::span<const MemorySnippet> memories,
                                      std::span<const Message* const> inbox,
                                      Rng& rng) const = 0;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual OpinionValue score(const std::string& text) const = 0;
};

/// Lowercased word tokens of a text (non-alphanumeric characters split).
std::vector<std::string> tokenize(const std::string& text);

/// Feature-hashing embedding: each token adds +-1 (signed hash) to one of
/// `dim` buckets; the result is L2-normalized. Empty text gives the zero
/// vector. Deterministic across runs and platforms.
Vector stub_embed(const std::string& text, int dim);

class StubEmbedder : public Embedder {
public:
    explicit StubEmbedder(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    Vector embed(const std::string& text) const override { return stub_embed(text, dim_); }

private:
    int dim_;
};

/// Keyword extraction backed by a corpus rarity table: the top-3 rarest
/// distinct tokens of a text (ties by lexicographic order) are hash-embedded
/// and normalized. Unknown tokens count as rarest. The table is built once
/// from the loaded dataset and read-only afterwards.
class KeywordProvider {
public:
    explicit KeywordProvider(int dim) : dim_(dim) {}

    void add_corpus_text(const std::string& text);

    int dim() const { return dim_; }
    std::vector<std::string> top_keywords(const std::string& text, int k = 3) const;
    Vector keyword_embedding(const std::string& text) const;

private:
    int dim_;
    std::unordered_map<std::string, std::int64_t> counts_;
};

/// Signed valence of lexicon words averaged over matches; 0 without matches.
double lexicon_score(const std::string& text);

/// Template-based offline generator. The intended opinion is
///   clamp(0.6 mean(memory opinions) + 0.3 mean(inbox opinions) + 0.1 bias)
/// with empty means counting as 0 and bias = lexicon_score(profile
/// description). The emitted text carries a parseable stance-band marker and
/// the leading keyword of the top retrieved memory.
class StubGenerator : public Generator {
public:
    GenerationResult generate(const AgentProfile& profile, std::span<const std::string> news,
                              std::span<const MemorySnippet> memories,
                              std::span<const Message* const> inbox,
                              Rng& rng) const override;
};

/// Reads the stance-band marker produced by StubGenerator when present,
/// otherwise falls back to the valence lexicon. Always clamped.
class StubScorer : public Scorer {
public:
    OpinionValue score(const std::string& text) const override;
};

/// Everything the simulation delegates to language/embedding models.
struct ProviderBundle {
    std::shared_ptr<const Embedder> embedder;          // d_e, message contents
    std::shared_ptr<const Embedder> profile_embedder;  // d_b, agent descriptions
    std::shared_ptr<KeywordProvider> keyworder;
    std::shared_ptr<const Generator> generator;
    std::shared_ptr<const Scorer> scorer;
};

/// Deterministic offline bundle; performs no network operations.
ProviderBundle make_stub_providers(const ProviderConfig& config);

}  // namespace gasim
