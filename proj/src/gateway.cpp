#include <httplib.h>
#include <json.hpp>

#include "pacvd/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "pacvd/digest.hpp"
#include "pacvd/errors.hpp"

namespace pacvd {

using nlohmann::json;
using nlohmann::ordered_json;

void ProviderConfig::validate() const {
    if (!(temperature >= 0 && temperature <= 2)) throw SchemaError(0, "temperature must be in [0, 2]");
    if (!(top_p > 0 && top_p <= 1)) throw SchemaError(0, "top_p must be in (0, 1]");
    if (max_tokens < 1) throw SchemaError(0, "max_tokens must be at least 1");
    if (max_retries < 0) throw SchemaError(0, "max_retries must be nonnegative");
    if (timeout.count() <= 0) throw SchemaError(0, "timeout_ms must be positive");
    if (backoff.count() < 0) throw SchemaError(0, "backoff_ms must be nonnegative");
    if (rpm < 0) throw SchemaError(0, "rpm must be nonnegative");
    if (max_in_flight < 1) throw SchemaError(0, "max_in_flight must be at least 1");
    if (max_input_chars < 16) throw SchemaError(0, "max_input_chars must be at least 16");
}

ProviderConfig parse_provider_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(0, std::string("invalid provider config: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError(0, "provider config must be a JSON object");
    ProviderConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "endpoint") c.endpoint = v.get<std::string>();
            else if (key == "model") c.model = v.get<std::string>();
            else if (key == "auth_env") c.auth_env = v.get<std::string>();
            else if (key == "temperature") c.temperature = v.get<double>();
            else if (key == "top_p") c.top_p = v.get<double>();
            else if (key == "max_tokens") c.max_tokens = v.get<int>();
            else if (key == "timeout_ms") c.timeout = std::chrono::milliseconds(v.get<long>());
            else if (key == "max_retries") c.max_retries = v.get<int>();
            else if (key == "backoff_ms") c.backoff = std::chrono::milliseconds(v.get<long>());
            else if (key == "rpm") c.rpm = v.get<double>();
            else if (key == "max_in_flight") c.max_in_flight = v.get<std::size_t>();
            else if (key == "max_input_chars") c.max_input_chars = v.get<std::size_t>();
            else throw SchemaError(0, "unknown provider config key: " + key);
        }
    } catch (const json::exception& e) {
        throw SchemaError(0, std::string("provider config: ") + e.what());
    }
    c.validate();
    return c;
}

ProviderConfig load_provider_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(0, "cannot read provider config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_provider_config(ss.str());
}

std::string_view to_string(VerdictLabel l) {
    switch (l) {
        case VerdictLabel::Yes: return "yes";
        case VerdictLabel::No: return "no";
        case VerdictLabel::Unparseable: return "unparseable";
    }
    return "?";
}

std::optional<VerdictLabel> parse_verdict_label(std::string_view text) {
    for (auto l : {VerdictLabel::Yes, VerdictLabel::No, VerdictLabel::Unparseable})
        if (to_string(l) == text) return l;
    return std::nullopt;
}

namespace {

// Lowercased runs of ASCII letters.
std::vector<std::string> alpha_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c) && c < 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string_view first_sentence(std::string_view text) {
    std::size_t end = text.find_first_of(".!?");
    end = std::min(end, text.find("\n\n"));
    return text.substr(0, std::min(end, text.size()));
}

}  // namespace

VerdictLabel parse_verdict(std::string_view text) {
    const auto sentence = alpha_tokens(first_sentence(text));
    const bool has_yes = std::find(sentence.begin(), sentence.end(), "yes") != sentence.end();
    const bool has_no = std::find(sentence.begin(), sentence.end(), "no") != sentence.end();
    if (has_yes && has_no) return VerdictLabel::Unparseable;
    const auto all = alpha_tokens(text);
    if (!all.empty() && all.front() == "yes") return VerdictLabel::Yes;
    if (!all.empty() && all.front() == "no") return VerdictLabel::No;
    if (has_yes) return VerdictLabel::Yes;
    if (has_no) return VerdictLabel::No;
    return VerdictLabel::Unparseable;
}

namespace {

ordered_json messages_json(const std::vector<Message>& messages) {
    ordered_json arr = ordered_json::array();
    for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
    return arr;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(0, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dialogue_text(const std::vector<Message>& messages) {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "\n\n";
        out += m.content;
    }
    return out;
}

}  // namespace

std::string transcript_to_json(const Verdict& v) {
    ordered_json j;
    j["provider"] = v.provider_id;
    j["label"] = std::string(to_string(v.label));
    j["raw"] = v.raw;
    j["messages"] = messages_json(v.turns);
    return j.dump(2) + "\n";
}

Verdict transcript_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        Verdict v;
        v.provider_id = j.at("provider").get<std::string>();
        const auto label = parse_verdict_label(j.at("label").get<std::string>());
        if (!label) throw SchemaError(0, "transcript has an unknown label");
        v.label = *label;
        v.raw = j.at("raw").get<std::string>();
        for (const auto& m : j.at("messages"))
            v.turns.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
        return v;
    } catch (const json::exception& e) {
        throw SchemaError(0, std::string("invalid transcript: ") + e.what());
    }
}

namespace {

class HttpTransport : public Transport {
  public:
    HttpResponse post(const std::string& url,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body, std::chrono::milliseconds timeout) override {
        const auto scheme = url.find("://");
        if (scheme == std::string::npos) throw TransportError("malformed endpoint " + url);
        const auto slash = url.find('/', scheme + 3);
        const std::string base = url.substr(0, slash);
        const std::string path = slash == std::string::npos ? "/" : url.substr(slash);
        httplib::Client client(base);
        const auto secs = timeout.count() / 1000;
        const auto usecs = (timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) throw TransportError("request to " + base + " failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }
};

std::string error_message(const std::string& body) {
    try {
        const json j = json::parse(body);
        if (j.contains("error")) {
            const auto& e = j.at("error");
            if (e.is_string()) return e.get<std::string>();
            if (e.is_object() && e.contains("message")) return e.at("message").get<std::string>();
        }
    } catch (const json::exception&) {
    }
    return body.substr(0, 200);
}

}  // namespace

std::unique_ptr<Transport> make_http_transport() { return std::make_unique<HttpTransport>(); }

ChatCompletionProvider::ChatCompletionProvider(ProviderConfig config,
                                               std::unique_ptr<Transport> transport,
                                               Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
    config_.validate();
    const char* token = std::getenv(config_.auth_env.c_str());
    if (!token || !*token) throw AuthMissing(config_.auth_env);
    token_ = token;
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string ChatCompletionProvider::id() const { return "chat:" + config_.model; }

std::string ChatCompletionProvider::request_body(const std::vector<Message>& messages) const {
    ordered_json j;
    j["model"] = config_.model;
    j["messages"] = messages_json(messages);
    j["temperature"] = config_.temperature;
    j["top_p"] = config_.top_p;
    j["max_tokens"] = config_.max_tokens;
    return j.dump();
}

std::string ChatCompletionProvider::chat(const std::vector<Message>& messages) {
    const std::string body = request_body(messages);
    const std::vector<std::pair<std::string, std::string>> headers{
        {"Authorization", "Bearer " + token_}};
    for (int attempt = 0;; ++attempt) {
        const bool last = attempt >= config_.max_retries;
        HttpResponse res;
        try {
            res = transport_->post(config_.endpoint, headers, body, config_.timeout);
        } catch (const TransportError&) {
            if (last) throw;
            sleep_(config_.backoff * (1LL << std::min(attempt, 20)));
            continue;
        }
        if (res.status >= 200 && res.status < 300) {
            try {
                const json j = json::parse(res.body);
                return j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception&) {
                throw ProviderError(res.status, "malformed completion: " + res.body.substr(0, 200));
            }
        }
        const bool transient = res.status == 429 || res.status >= 500;
        if (!transient || last) throw ProviderError(res.status, error_message(res.body));
        sleep_(config_.backoff * (1LL << std::min(attempt, 20)));
    }
}

std::string fingerprint(const std::vector<Message>& messages) {
    return sha256_hex(messages_json(messages).dump());
}

std::shared_ptr<MockProvider> MockProvider::from_json(std::string_view json_text) {
    auto m = std::make_shared<MockProvider>();
    try {
        const json j = json::parse(json_text);
        if (!j.is_object()) throw SchemaError(0, "mock script must be a JSON object");
        m->id_ = j.value("id", std::string("mock"));
        m->strict_ = j.value("strict", false);
        if (j.contains("default")) m->default_ = j.at("default").get<std::string>();
        const auto strings = [](const json& v) {
            if (v.is_string()) return std::vector<std::string>{v.get<std::string>()};
            return v.get<std::vector<std::string>>();
        };
        if (j.contains("rules"))
            for (const auto& r : j.at("rules")) {
                Rule rule;
                if (r.contains("contains")) rule.contains = strings(r.at("contains"));
                if (r.contains("absent")) rule.absent = strings(r.at("absent"));
                rule.reply = r.at("reply").get<std::string>();
                m->rules_.push_back(std::move(rule));
            }
        if (j.contains("replies"))
            for (const auto& [fp, reply] : j.at("replies").items())
                m->replies_[fp] = reply.get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(0, std::string("invalid mock script: ") + e.what());
    }
    return m;
}

std::string MockProvider::to_json() const {
    ordered_json j;
    j["id"] = id_;
    j["strict"] = strict_;
    if (default_) j["default"] = *default_;
    ordered_json rules = ordered_json::array();
    for (const auto& r : rules_)
        rules.push_back({{"contains", r.contains}, {"absent", r.absent}, {"reply", r.reply}});
    j["rules"] = std::move(rules);
    j["replies"] = replies_;
    return j.dump(2) + "\n";
}

std::string MockProvider::chat(const std::vector<Message>& messages) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    const std::string fp = fingerprint(messages);
    if (const auto it = replies_.find(fp); it != replies_.end()) return it->second;
    const std::string text = dialogue_text(messages);
    for (const auto& r : rules_) {
        const bool all = std::all_of(r.contains.begin(), r.contains.end(), [&](const auto& s) {
            return text.find(s) != std::string::npos;
        });
        const bool none = std::none_of(r.absent.begin(), r.absent.end(), [&](const auto& s) {
            return text.find(s) != std::string::npos;
        });
        if (all && none) return r.reply;
    }
    if (default_ && !strict_) return *default_;
    throw UnscriptedPrompt(fp);
}

std::size_t MockProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::string RecordingProvider::chat(const std::vector<Message>& messages) {
    std::string reply = inner_->chat(messages);
    std::lock_guard lock(mu_);
    replies_[fingerprint(messages)] = reply;
    return reply;
}

std::shared_ptr<MockProvider> RecordingProvider::script() const {
    auto m = std::make_shared<MockProvider>();
    m->set_strict(true);
    std::lock_guard lock(mu_);
    for (const auto& [fp, reply] : replies_) m->add_reply(fp, reply);
    return m;
}

TokenBucket::TokenBucket(double rpm, double burst, Sleeper sleeper)
    : interval_ns_(rpm > 0 ? 60e9 / rpm : 0), burst_(std::max(1.0, burst)),
      sleep_(std::move(sleeper)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::nanoseconds TokenBucket::reserve(Clock::time_point now) {
    if (interval_ns_ <= 0) return std::chrono::nanoseconds(0);
    std::lock_guard lock(mu_);
    if (!started_) {
        origin_ = now;
        started_ = true;
    }
    const double t = std::chrono::duration<double, std::nano>(now - origin_).count();
    const double tat = std::max(tat_ns_, t);
    const double wait = std::max(0.0, tat - (burst_ - 1) * interval_ns_ - t);
    tat_ns_ = tat + interval_ns_;
    return std::chrono::nanoseconds(static_cast<long long>(std::ceil(wait)));
}

void TokenBucket::acquire() {
    const auto wait = reserve(Clock::now());
    if (wait.count() > 0)
        sleep_(std::chrono::ceil<std::chrono::milliseconds>(wait));
}

std::string truncate_reply(std::string_view text, std::size_t limit) {
    static constexpr std::string_view kEllipsis = "\xE2\x80\xA6";
    if (text.size() <= limit) return std::string(text);
    std::size_t cut = limit > kEllipsis.size() ? limit - kEllipsis.size() : 0;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut)) + std::string(kEllipsis);
}

Gateway::Gateway(ProviderConfig config, std::shared_ptr<Provider> provider)
    : config_(std::move(config)), provider_(std::move(provider)), bucket_(config_.rpm),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
    config_.validate();
}

std::string Gateway::dispatch(const std::vector<Message>& messages) {
    bucket_.acquire();
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{in_flight_};
    return provider_->chat(messages);
}

Verdict Gateway::complete(const PromptBundle& bundle) {
    if (!bundle.placeholders_resolved) throw UnresolvedPlaceholder("bundle");
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    v.provider_id = provider_->id();
    std::string reply;
    const auto& turns = bundle.turns;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const Turn& t = turns[i];
        if (t.role == TurnRole::System) {
            v.turns.push_back({"system", t.text});
        } else if (t.role == TurnRole::User) {
            std::string text = t.text;
            if (t.awaits_reply) {
                const auto at = text.find(kReplySlot);
                if (at != std::string::npos)
                    text.replace(at, kReplySlot.size(), truncate_reply(reply, config_.max_input_chars));
            }
            v.turns.push_back({"user", std::move(text)});
            const bool answer = i + 1 == turns.size() ||
                                turns[i + 1].role == TurnRole::AssistantPlaceholder;
            if (answer) {
                reply = dispatch(v.turns);
                v.turns.push_back({"assistant", reply});
            }
        }
    }
    v.raw = reply;
    v.label = parse_verdict(reply);
    v.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return v;
}

std::shared_ptr<Provider> make_provider(const std::string& spec, const ProviderConfig& config) {
    if (spec.rfind("mock:", 0) == 0) return MockProvider::from_json(read_text(spec.substr(5)));
    if (!spec.empty() && spec != "http")
        throw SchemaError(0, "unknown provider '" + spec + "' (expected mock:<script> or http)");
    if (config.endpoint.empty()) throw SchemaError(0, "provider config has no endpoint");
    return std::make_shared<ChatCompletionProvider>(config, make_http_transport());
}

}  // namespace pacvd
