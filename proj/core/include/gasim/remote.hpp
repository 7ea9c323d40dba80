#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "gasim/config.hpp"
#include "gasim/providers.hpp"

namespace gasim {

class RemoteError : public Error {
public:
    using Error::Error;
};
class RemoteNetworkError : public RemoteError {
public:
    using RemoteError::RemoteError;
};
class RemoteTimeoutError : public RemoteError {
public:
    using RemoteError::RemoteError;
};
class RemoteParseError : public RemoteError {
public:
    using RemoteError::RemoteError;
};

/// Chat-completion style HTTP client with bounded concurrency, timeouts and
/// exponential-backoff retries. Every attempted HTTP request increments a
/// process-wide counter so tests can assert that stub-only runs touch the
/// network zero times.
class RemoteClient {
public:
    explicit RemoteClient(const ProviderConfig& config);
    ~RemoteClient();

    /// Sends {system, user} messages and returns the assistant text.
    /// Throws RemoteNetworkError / RemoteTimeoutError / RemoteParseError.
    std::string chat(const std::string& system_prompt, const std::string& user_content) const;

    static std::uint64_t request_count();
    static void reset_request_count();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Fills {name} placeholders in a template string.
std::string render_template(std::string text,
                            const std::vector<std::pair<std::string, std::string>>& values);

/// Loads a template file, or returns the built-in default when path is empty.
std::string load_template(const std::string& templates_dir, const std::string& name);

/// Scores text by asking the remote endpoint for a single real in [-1, 1].
class RemoteScorer : public Scorer {
public:
    RemoteScorer(std::shared_ptr<const RemoteClient> client, std::string system_template,
                 std::string topic);
    OpinionValue score(const std::string& text) const override;

private:
    std::shared_ptr<const RemoteClient> client_;
    std::string system_prompt_;
};

/// Persona-conditioned remote text generation; the intended opinion of the
/// result is the remote score of the generated text.
class RemoteGenerator : public Generator {
public:
    RemoteGenerator(std::shared_ptr<const RemoteClient> client, std::string system_template,
                    std::shared_ptr<const Scorer> scorer);
    GenerationResult generate(const AgentProfile& profile, std::span<const std::string> news,
                              std::span<const MemorySnippet> memories,
                              std::span<const Message* const> inbox,
                              Rng& rng) const override;

private:
    std::shared_ptr<const RemoteClient> client_;
    std::string system_template_;
    std::shared_ptr<const Scorer> scorer_;
};

/// Stub bundle with generator and scorer replaced by remote calls; embeddings
/// and keywords stay local. With fallback_stub set, any remote error is
/// absorbed and the deterministic stub answers instead.
ProviderBundle make_remote_providers(const ProviderConfig& config, const std::string& topic,
                                     bool fallback_stub = false);

}  // namespace gasim
