#include "gasim/remote.hpp"

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace gasim {

namespace {

std::atomic<std::uint64_t> g_request_count{0};

struct ParsedEndpoint {
    std::string base;  // scheme://host:port
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw RemoteNetworkError("remote: endpoint must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

struct RemoteClient::Impl {
    ParsedEndpoint endpoint;
    std::string api_key;
    double timeout_seconds;
    int max_retries;
    mutable std::counting_semaphore<256> inflight;

    explicit Impl(const ProviderConfig& config)
        : endpoint(parse_endpoint(config.endpoint)),
          timeout_seconds(config.timeout_seconds),
          max_retries(config.max_retries),
          inflight(std::max(1, config.max_inflight)) {
        if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
    }
};

RemoteClient::RemoteClient(const ProviderConfig& config)
    : impl_(std::make_unique<Impl>(config)) {
    if (config.endpoint.empty())
        throw RemoteNetworkError("remote: no endpoint configured");
}

RemoteClient::~RemoteClient() = default;

std::uint64_t RemoteClient::request_count() { return g_request_count.load(); }
void RemoteClient::reset_request_count() { g_request_count.store(0); }

std::string RemoteClient::chat(const std::string& system_prompt,
                               const std::string& user_content) const {
    const nlohmann::json payload = {
        {"messages",
         {{{"role", "system"}, {"content", system_prompt}},
          {{"role", "user"}, {"content", user_content}}}},
        {"temperature", 0.0},
    };
    const std::string body = payload.dump();

    std::string failure = "remote: request failed";
    bool timed_out = false;
    for (int attempt = 0; attempt <= impl_->max_retries; ++attempt) {
        if (attempt > 0) {
            // Exponential backoff: 0.1s, 0.2s, 0.4s, ...
            const auto delay = std::chrono::milliseconds(100LL << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }

        impl_->inflight.acquire();
        g_request_count.fetch_add(1);
        httplib::Client client(impl_->endpoint.base);
        const auto timeout = std::chrono::duration<double>(impl_->timeout_seconds);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!impl_->api_key.empty())
            headers.emplace("Authorization", "Bearer " + impl_->api_key);
        auto res = client.Post(impl_->endpoint.path, headers, body, "application/json");
        impl_->inflight.release();

        if (!res) {
            timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                        res.error() == httplib::Error::Read ||
                        res.error() == httplib::Error::Write;
            failure = "remote: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            failure = "remote: HTTP status " + std::to_string(res->status);
            timed_out = false;
            continue;
        }
        try {
            const auto doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            failure = std::string("remote: unparseable response: ") + e.what();
            timed_out = false;
        }
    }
    if (timed_out) throw RemoteTimeoutError(failure);
    if (failure.find("unparseable") != std::string::npos) throw RemoteParseError(failure);
    throw RemoteNetworkError(failure);
}

std::string render_template(std::string text,
                            const std::vector<std::pair<std::string, std::string>>& values) {
    for (const auto& [name, value] : values) {
        const std::string needle = "{" + name + "}";
        for (auto pos = text.find(needle); pos != std::string::npos;
             pos = text.find(needle, pos + value.size())) {
            text.replace(pos, needle.size(), value);
        }
    }
    return text;
}

namespace {

constexpr const char* kDefaultScorerTemplate =
    "Rate the attitude the comment below expresses toward this topic: {topic}.\n"
    "Reply with one number between -1 and 1, where -1 means strongly against\n"
    "and 1 means strongly in favor. Output the number only.";

constexpr const char* kDefaultGeneratorTemplate =
    "You are a social media user.\n"
    "Persona: {persona}\n"
    "Current news: {news}\n"
    "Relevant memories: {memories}\n"
    "Recent posts from people you follow: {inbox}\n"
    "Write a short post reacting to what you read, staying in character.";

}  // namespace

std::string load_template(const std::string& templates_dir, const std::string& name) {
    if (!templates_dir.empty()) {
        std::ifstream in(templates_dir + "/" + name + ".txt");
        if (in) {
            std::stringstream buf;
            buf << in.rdbuf();
            return buf.str();
        }
    }
    if (name == "scorer") return kDefaultScorerTemplate;
    if (name == "generator") return kDefaultGeneratorTemplate;
    throw Error("load_template: unknown template '" + name + "'");
}

RemoteScorer::RemoteScorer(std::shared_ptr<const RemoteClient> client,
                           std::string system_template, std::string topic)
    : client_(std::move(client)),
      system_prompt_(render_template(std::move(system_template), {{"topic", topic}})) {}

OpinionValue RemoteScorer::score(const std::string& text) const {
    const std::string reply = client_->chat(system_prompt_, text);
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(reply.c_str(), &end);
    if (end == reply.c_str() || errno == ERANGE)
        throw RemoteParseError("remote scorer: expected a real number, got '" + reply + "'");
    return OpinionValue(value);
}

RemoteGenerator::RemoteGenerator(std::shared_ptr<const RemoteClient> client,
                                 std::string system_template,
                                 std::shared_ptr<const Scorer> scorer)
    : client_(std::move(client)),
      system_template_(std::move(system_template)),
      scorer_(std::move(scorer)) {}

GenerationResult RemoteGenerator::generate(const AgentProfile& profile,
                                           std::span<const std::string> news,
                                           std::span<const MemorySnippet> memories,
                                           std::span<const Message* const> inbox,
                                           Rng& rng) const {
    (void)rng;  // remote sampling is the endpoint's business
    auto join = [](auto&& range, auto&& to_text) {
        std::string out;
        for (const auto& item : range) {
            if (!out.empty()) out += "\n- ";
            else out = "- ";
            out += to_text(item);
        }
        return out.empty() ? std::string("(none)") : out;
    };
    const std::string prompt = render_template(
        system_template_,
        {{"persona", profile.description},
         {"news", join(news, [](const std::string& s) { return s; })},
         {"memories", join(memories, [](const MemorySnippet& m) { return m.content; })},
         {"inbox", join(inbox, [](const Message* m) { return m->content; })}});

    GenerationResult result;
    result.text = client_->chat(prompt, "Write your post now.");
    result.intended_opinion = scorer_->score(result.text).value();
    return result;
}

namespace {

class FallbackScorer : public Scorer {
public:
    FallbackScorer(std::shared_ptr<const Scorer> remote, std::shared_ptr<const Scorer> stub)
        : remote_(std::move(remote)), stub_(std::move(stub)) {}
    OpinionValue score(const std::string& text) const override {
        try {
            return remote_->score(text);
        } catch (const RemoteError&) {
            return stub_->score(text);
        }
    }

private:
    std::shared_ptr<const Scorer> remote_;
    std::shared_ptr<const Scorer> stub_;
};

class FallbackGenerator : public Generator {
public:
    FallbackGenerator(std::shared_ptr<const Generator> remote,
                      std::shared_ptr<const Generator> stub)
        : remote_(std::move(remote)), stub_(std::move(stub)) {}
    GenerationResult generate(const AgentProfile& profile, std::span<const std::string> news,
                              std::span<const MemorySnippet> memories,
                              std::span<const Message* const> inbox,
                              Rng& rng) const override {
        try {
            return remote_->generate(profile, news, memories, inbox, rng);
        } catch (const RemoteError&) {
            return stub_->generate(profile, news, memories, inbox, rng);
        }
    }

private:
    std::shared_ptr<const Generator> remote_;
    std::shared_ptr<const Generator> stub_;
};

}  // namespace

ProviderBundle make_remote_providers(const ProviderConfig& config, const std::string& topic,
                                     bool fallback_stub) {
    ProviderBundle bundle = make_stub_providers(config);
    auto client = std::make_shared<const RemoteClient>(config);
    auto scorer = std::make_shared<const RemoteScorer>(
        client, load_template(config.templates_dir, "scorer"), topic);
    auto generator = std::make_shared<const RemoteGenerator>(
        client, load_template(config.templates_dir, "generator"), scorer);
    if (fallback_stub) {
        bundle.scorer = std::make_shared<FallbackScorer>(scorer, bundle.scorer);
        bundle.generator = std::make_shared<FallbackGenerator>(generator, bundle.generator);
    } else {
        bundle.scorer = scorer;
        bundle.generator = generator;
    }
    return bundle;
}

}  // namespace gasim
