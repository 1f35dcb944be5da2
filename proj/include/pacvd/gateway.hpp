#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "pacvd/prompt.hpp"

namespace pacvd {

struct ProviderConfig {
    /// Full chat-completions URL, e.g. https://host/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Environment variable holding the bearer token.
    std::string auth_env = "PACVD_API_KEY";
    double temperature = 0.1;
    double top_p = 0.95;
    int max_tokens = 512;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{500};
    /// Requests per minute; 0 disables rate limiting.
    double rpm = 0;
    std::size_t max_in_flight = 4;
    /// Longest first-turn reply spliced into a follow-up turn.
    std::size_t max_input_chars = 24000;

    /// Throws SchemaError when a field is out of range.
    void validate() const;
};

/// JSON object with keys endpoint, model, auth_env, temperature, top_p, max_tokens,
/// timeout_ms, max_retries, backoff_ms, rpm, max_in_flight, max_input_chars. Missing keys keep
/// their defaults; unknown keys are rejected.
ProviderConfig parse_provider_config(std::string_view json_text);
ProviderConfig load_provider_config(const std::string& path);

struct Message {
    std::string role;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

enum class VerdictLabel { Yes, No, Unparseable };
std::string_view to_string(VerdictLabel l);
std::optional<VerdictLabel> parse_verdict_label(std::string_view text);

/// yes/no/unparseable from free text, case-insensitive. Both "yes" and "no" as standalone tokens
/// in the first sentence give unparseable; otherwise a leading yes/no wins, then a lone yes/no
/// token in the first sentence.
VerdictLabel parse_verdict(std::string_view text);

struct Verdict {
    VerdictLabel label = VerdictLabel::Unparseable;
    std::string raw;
    /// Full dialogue including intermediate replies.
    std::vector<Message> turns;
    std::chrono::milliseconds latency{0};
    std::string provider_id;
};

/// {"provider","label","raw","messages":[{"role","content"}]}. Latency is not persisted so that
/// transcripts are reproducible.
std::string transcript_to_json(const Verdict& v);
Verdict transcript_from_json(std::string_view text);

/// Answers one chat exchange. Implementations must be safe for concurrent calls.
class Provider {
  public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    virtual std::string chat(const std::vector<Message>& messages) = 0;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Raw POST; throws TransportError when no response was received.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport with TLS support.
std::unique_ptr<Transport> make_http_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Chat-completions client: {model, messages, temperature, top_p, max_tokens}. Retries
/// transport failures, 429 and 5xx with exponential backoff; other 4xx raise ProviderError at once.
class ChatCompletionProvider : public Provider {
  public:
    /// Reads the token from config.auth_env; throws AuthMissing when unset.
    ChatCompletionProvider(ProviderConfig config, std::unique_ptr<Transport> transport,
                           Sleeper sleeper = {});
    std::string id() const override;
    std::string chat(const std::vector<Message>& messages) override;

    std::string request_body(const std::vector<Message>& messages) const;

  private:
    ProviderConfig config_;
    std::unique_ptr<Transport> transport_;
    Sleeper sleep_;
    std::string token_;
};

/// SHA-256 over the JSON form of a message list; key of fingerprint replay.
std::string fingerprint(const std::vector<Message>& messages);

/// Deterministic scripted backend. Lookup order: exact fingerprint, first matching rule,
/// default reply. Without a match (or with `strict` and no fingerprint/rule hit) it throws
/// UnscriptedPrompt.
class MockProvider : public Provider {
  public:
    struct Rule {
        /// Matches when the dialogue text contains every `contains` and no `absent` string.
        std::vector<std::string> contains;
        std::vector<std::string> absent;
        std::string reply;
    };

    MockProvider() = default;
    /// {"id"?, "strict"?, "default"?, "rules":[{"contains":str|[str],"absent"?:...,"reply"}],
    ///  "replies":{fingerprint: reply}}
    static std::shared_ptr<MockProvider> from_json(std::string_view json_text);
    std::string to_json() const;

    std::string id() const override { return id_; }
    std::string chat(const std::vector<Message>& messages) override;

    void add_rule(Rule r) { rules_.push_back(std::move(r)); }
    void set_default(std::string reply) { default_ = std::move(reply); }
    void set_strict(bool strict) { strict_ = strict; }
    void add_reply(std::string fp, std::string reply) { replies_[std::move(fp)] = std::move(reply); }
    std::size_t calls() const;

  private:
    std::string id_ = "mock";
    bool strict_ = false;
    std::optional<std::string> default_;
    std::vector<Rule> rules_;
    std::map<std::string, std::string> replies_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

/// Records every exchange of an inner provider as fingerprint replies for later replay.
class RecordingProvider : public Provider {
  public:
    explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}
    std::string id() const override { return inner_->id(); }
    std::string chat(const std::vector<Message>& messages) override;
    /// Strict mock script replaying the recorded exchanges.
    std::shared_ptr<MockProvider> script() const;

  private:
    std::shared_ptr<Provider> inner_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> replies_;
};

/// Rate limiter with `rpm` requests per minute and a burst of `burst`; 0 rpm admits at once.
class TokenBucket {
  public:
    using Clock = std::chrono::steady_clock;
    TokenBucket(double rpm, double burst = 1, Sleeper sleeper = {});
    /// Blocks until a token is available.
    void acquire();
    /// Wait needed at time `now` for the next token, reserving it.
    std::chrono::nanoseconds reserve(Clock::time_point now);

  private:
    double interval_ns_;
    double burst_;
    Sleeper sleep_;
    std::mutex mu_;
    double tat_ns_ = 0;
    bool started_ = false;
    Clock::time_point origin_;
};

/// Tail-truncates `text` to at most `limit` bytes at a UTF-8 boundary, appending an ellipsis.
std::string truncate_reply(std::string_view text, std::size_t limit);

/// Dispatches bundles turn by turn through a provider with rate limiting and an in-flight bound.
class Gateway {
  public:
    Gateway(ProviderConfig config, std::shared_ptr<Provider> provider);
    Verdict complete(const PromptBundle& bundle);
    const ProviderConfig& config() const { return config_; }
    std::string provider_id() const { return provider_->id(); }

  private:
    std::string dispatch(const std::vector<Message>& messages);

    ProviderConfig config_;
    std::shared_ptr<Provider> provider_;
    TokenBucket bucket_;
    std::counting_semaphore<> in_flight_;
};

/// "mock:<script.json>" builds a MockProvider; anything else is a chat-completions backend from
/// `config`.
std::shared_ptr<Provider> make_provider(const std::string& spec, const ProviderConfig& config);

}  // namespace pacvd
