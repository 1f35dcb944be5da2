#include <httplib.h>
#include <doctest.h>

#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <random>
#include <thread>

#include "pacvd/errors.hpp"
#include "pacvd/gateway.hpp"
#include "pacvd/prompt.hpp"

using namespace pacvd;
using namespace std::chrono_literals;

namespace {

struct ScopedEnv {
    std::string name;
    ScopedEnv(std::string n, const char* value) : name(std::move(n)) {
        if (value) setenv(name.c_str(), value, 1);
        else unsetenv(name.c_str());
    }
    ~ScopedEnv() { unsetenv(name.c_str()); }
};

// Replays queued outcomes: a status/body pair or a transport failure (status 0).
class FakeTransport : public Transport {
  public:
    std::deque<HttpResponse> queue;
    std::vector<std::string> bodies;
    std::vector<std::pair<std::string, std::string>> last_headers;
    std::string last_url;

    HttpResponse post(const std::string& url,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body, std::chrono::milliseconds) override {
        last_url = url;
        last_headers = headers;
        bodies.push_back(body);
        if (queue.empty()) throw TransportError("no scripted response");
        auto r = queue.front();
        queue.pop_front();
        if (r.status == 0) throw TransportError("connection reset");
        return r;
    }
};

std::string completion(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

ProviderConfig test_config() {
    ProviderConfig c;
    c.endpoint = "https://llm.test/v1/chat/completions";
    c.model = "m1";
    c.auth_env = "PACVD_TEST_KEY";
    c.max_retries = 3;
    c.backoff = 100ms;
    return c;
}

struct Harness {
    ScopedEnv env{"PACVD_TEST_KEY", "sk-test"};
    FakeTransport* transport = nullptr;
    std::vector<std::chrono::milliseconds> sleeps;
    std::unique_ptr<ChatCompletionProvider> provider;

    explicit Harness(std::initializer_list<HttpResponse> responses, ProviderConfig c = test_config()) {
        auto t = std::make_unique<FakeTransport>();
        t->queue.assign(responses.begin(), responses.end());
        transport = t.get();
        provider = std::make_unique<ChatCompletionProvider>(
            c, std::move(t), [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
    }
};

const std::vector<Message> kHello{{"user", "hello"}};

PromptBundle bundle_of(PromptStrategy s, const std::string& code = "int x;") {
    return build_prompt(s, code, "api facts", ExemplarStore{});
}

}  // namespace

TEST_CASE("verdict parsing") {
    CHECK(parse_verdict("yes") == VerdictLabel::Yes);
    CHECK(parse_verdict("Yes, the pointer is freed twice.") == VerdictLabel::Yes);
    CHECK(parse_verdict("NO. The code is fine.") == VerdictLabel::No);
    CHECK(parse_verdict("**No** vulnerability is present") == VerdictLabel::No);
    CHECK(parse_verdict("  \n yes: use after free") == VerdictLabel::Yes);
    CHECK(parse_verdict("After analysis, yes. It leaks.") == VerdictLabel::Yes);
    CHECK(parse_verdict("The answer is no.") == VerdictLabel::No);
    CHECK(parse_verdict("yes or no, hard to say.") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("The code looks odd. yes") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("The code looks odd. Maybe.") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("yesterday it was fine") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("nothing to report") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("Possibly\n\nno") == VerdictLabel::Unparseable);
    CHECK(parse_verdict("no\n\nyes, on reflection") == VerdictLabel::No);
    CHECK(parse_verdict("Possibly\n\nyes and no") == VerdictLabel::Unparseable);

    CHECK(parse_verdict_label("yes") == VerdictLabel::Yes);
    CHECK(parse_verdict_label("unparseable") == VerdictLabel::Unparseable);
    CHECK_FALSE(parse_verdict_label("YES"));
}

TEST_CASE("verdict parsing fuzz") {
    std::mt19937_64 rng(3);
    const char* words[] = {"the", "code", "is", "safe", "unsafe", "maybe", "known", "bug", "yes", "no"};
    const char* seps[] = {" ", ", ", ". ", "\n\n", "! ", "? "};
    for (int i = 0; i < 2000; ++i) {
        std::string text;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int w = 0; w < n; ++w) {
            if (w) text += seps[rng() % 6];
            text += words[rng() % 10];
        }
        const auto label = parse_verdict(text);
        CAPTURE(text);
        // a leading verdict word decides unless the first sentence contradicts it
        const bool lead_yes = text.rfind("yes", 0) == 0;
        const bool lead_no = text.rfind("no", 0) == 0 && text.rfind("known", 0) != 0;
        if (text.find("yes") == std::string::npos && text.find("no") == std::string::npos)
            CHECK(label == VerdictLabel::Unparseable);
        if (label == VerdictLabel::Yes) CHECK(text.find("yes") != std::string::npos);
        if (label == VerdictLabel::No) CHECK(text.find("no") != std::string::npos);
        if (lead_yes && label != VerdictLabel::Unparseable) CHECK(label == VerdictLabel::Yes);
        if (lead_no && label != VerdictLabel::Unparseable) CHECK(label == VerdictLabel::No);
        CHECK(parse_verdict(text) == label);
    }
}

TEST_CASE("mock provider lookup") {
    auto mock = MockProvider::from_json(R"({
        "id": "m",
        "default": "no, fine",
        "rules": [
            {"contains": ["free", "twice"], "absent": "guarded", "reply": "yes, double free"},
            {"contains": "leak", "reply": "yes, leak"}
        ]})");
    CHECK(mock->id() == "m");
    CHECK(mock->chat({{"user", "free it twice"}}) == "yes, double free");
    CHECK(mock->chat({{"user", "free it twice"}, {"user", "guarded"}}) == "no, fine");
    CHECK(mock->chat({{"user", "free"}, {"assistant", "twice"}}) == "yes, double free");
    CHECK(mock->chat({{"user", "a leak"}}) == "yes, leak");
    CHECK(mock->chat({{"user", "other"}}) == "no, fine");
    CHECK(mock->calls() == 5);

    mock->add_reply(fingerprint({{"user", "other"}}), "scripted");
    CHECK(mock->chat({{"user", "other"}}) == "scripted");

    mock->set_strict(true);
    CHECK_THROWS_AS(mock->chat({{"user", "unknown"}}), UnscriptedPrompt);
    CHECK(mock->chat({{"user", "a leak"}}) == "yes, leak");

    MockProvider empty;
    CHECK_THROWS_AS(empty.chat(kHello), UnscriptedPrompt);

    CHECK_THROWS_AS(MockProvider::from_json("{"), SchemaError);
    CHECK_THROWS_AS(MockProvider::from_json("[]"), SchemaError);
    CHECK_THROWS_AS(MockProvider::from_json(R"({"rules":[{"contains":"x"}]})"), SchemaError);

    const auto again = MockProvider::from_json(mock->to_json());
    CHECK(again->to_json() == mock->to_json());
    CHECK(again->chat({{"user", "other"}}) == "scripted");
}

TEST_CASE("fingerprints distinguish role and content") {
    CHECK(fingerprint(kHello) == fingerprint({{"user", "hello"}}));
    CHECK(fingerprint(kHello) != fingerprint({{"system", "hello"}}));
    CHECK(fingerprint(kHello) != fingerprint({{"user", "hello "}}));
    CHECK(fingerprint({{"user", "a"}, {"user", "b"}}) != fingerprint({{"user", "a\n\nb"}}));
}

TEST_CASE("record then replay yields identical transcripts") {
    auto base = std::make_shared<MockProvider>();
    base->add_rule({{"pointers"}, {}, "The function frees r->buf on two paths."});
    base->set_default("yes, r->buf is freed twice.");
    auto recorder = std::make_shared<RecordingProvider>(base);
    Gateway live(ProviderConfig{}, recorder);

    std::vector<std::string> live_transcripts;
    std::vector<PromptBundle> bundles;
    for (auto s : kAllStrategies)
        if (!is_few_shot(s)) bundles.push_back(bundle_of(s));
    for (const auto& b : bundles) live_transcripts.push_back(transcript_to_json(live.complete(b)));

    const auto script = recorder->script();
    const auto replayed = MockProvider::from_json(script->to_json());
    Gateway replay(ProviderConfig{}, replayed);
    for (std::size_t i = 0; i < bundles.size(); ++i)
        CHECK(transcript_to_json(replay.complete(bundles[i])) == live_transcripts[i]);
    CHECK_THROWS_AS(replay.complete(bundle_of(PromptStrategy::BasicPrompt, "int other;")),
                    UnscriptedPrompt);
}

TEST_CASE("gateway sends the dialogue turn by turn") {
    auto mock = std::make_shared<MockProvider>();
    mock->add_rule({{"Based on your previous analysis"}, {}, "yes, confirmed"});
    mock->set_default("Pointer p is freed and then used.");
    Gateway g(ProviderConfig{}, mock);

    const auto v = g.complete(bundle_of(PromptStrategy::ChainOfThought));
    REQUIRE(v.turns.size() == 4);
    CHECK(v.turns[0].role == "user");
    CHECK(v.turns[1] == Message{"assistant", "Pointer p is freed and then used."});
    CHECK(v.turns[2].content.find("Based on your previous analysis: Pointer p is freed and then "
                                  "used., determine") != std::string::npos);
    CHECK(v.turns[2].content.find(kReplySlot) == std::string::npos);
    CHECK(v.turns[3] == Message{"assistant", "yes, confirmed"});
    CHECK(v.label == VerdictLabel::Yes);
    CHECK(v.raw == "yes, confirmed");
    CHECK(mock->calls() == 2);

    const auto rp = g.complete(bundle_of(PromptStrategy::RolePlaying));
    REQUIRE(rp.turns.size() == 3);
    CHECK(rp.turns[0].role == "system");
    CHECK(rp.turns[1].role == "user");
    CHECK(mock->calls() == 3);

    const auto ic = g.complete(bundle_of(PromptStrategy::InContext));
    REQUIRE(ic.turns.size() == 4);
    CHECK(ic.turns[2].content.rfind("Based on your initial observations", 0) == 0);
    CHECK(mock->calls() == 5);

    PromptBundle unresolved = bundle_of(PromptStrategy::BasicPrompt);
    unresolved.placeholders_resolved = false;
    CHECK_THROWS_AS(g.complete(unresolved), UnresolvedPlaceholder);
}

TEST_CASE("long first replies are truncated before splicing") {
    CHECK(truncate_reply("short", 10) == "short");
    CHECK(truncate_reply("abcdefghij", 10) == "abcdefghij");
    CHECK(truncate_reply("abcdefghijk", 10) == "abcdefg\xE2\x80\xA6");
    // never split a multibyte sequence
    const std::string greek = "\xCE\xB1\xCE\xB2\xCE\xB3\xCE\xB4";
    CHECK(truncate_reply(greek, 6) == "\xCE\xB1\xE2\x80\xA6");
    CHECK(truncate_reply(greek, 7) == "\xCE\xB1\xCE\xB2\xE2\x80\xA6");

    auto mock = std::make_shared<MockProvider>();
    mock->add_rule({{"previous analysis"}, {}, "no"});
    mock->set_default(std::string(100, 'z'));
    ProviderConfig c;
    c.max_input_chars = 20;
    Gateway g(c, mock);
    const auto v = g.complete(bundle_of(PromptStrategy::ChainOfThought));
    CHECK(v.turns[2].content.find(std::string(17, 'z') + "\xE2\x80\xA6,") != std::string::npos);
    CHECK(v.turns[2].content.find(std::string(18, 'z')) == std::string::npos);
}

TEST_CASE("chat completion request and response") {
    Harness h({{200, completion("yes, leak")}});
    CHECK(h.provider->id() == "chat:m1");
    CHECK(h.provider->chat(kHello) == "yes, leak");
    CHECK(h.transport->last_url == "https://llm.test/v1/chat/completions");
    CHECK(h.transport->last_headers ==
          std::vector<std::pair<std::string, std::string>>{{"Authorization", "Bearer sk-test"}});
    const auto body = nlohmann::json::parse(h.transport->bodies.at(0));
    CHECK(body.at("model") == "m1");
    CHECK(body.at("messages") == nlohmann::json::parse(R"([{"role":"user","content":"hello"}])"));
    CHECK(body.at("temperature") == 0.1);
    CHECK(body.at("top_p") == 0.95);
    CHECK(body.at("max_tokens") == 512);
    CHECK(h.sleeps.empty());

    Harness bad({{200, "{\"choices\":[]}"}});
    CHECK_THROWS_AS(bad.provider->chat(kHello), ProviderError);
}

TEST_CASE("retry policy") {
    SUBCASE("client errors are not retried") {
        Harness h({{400, R"({"error":{"message":"bad request"}})"}, {200, completion("x")}});
        try {
            h.provider->chat(kHello);
            FAIL("expected throw");
        } catch (const ProviderError& e) {
            CHECK(e.status() == 400);
            CHECK(std::string(e.what()).find("bad request") != std::string::npos);
        }
        CHECK(h.transport->bodies.size() == 1);
        CHECK(h.sleeps.empty());
    }
    SUBCASE("rate limiting backs off exponentially then succeeds") {
        Harness h({{429, "{}"}, {503, "{}"}, {200, completion("no")}});
        CHECK(h.provider->chat(kHello) == "no");
        CHECK(h.sleeps == std::vector<std::chrono::milliseconds>{100ms, 200ms});
    }
    SUBCASE("exhausted retries on 429") {
        Harness h({{429, "{}"}, {429, "{}"}, {429, "{}"}, {429, "{\"error\":\"slow down\"}"}});
        try {
            h.provider->chat(kHello);
            FAIL("expected throw");
        } catch (const ProviderError& e) {
            CHECK(e.status() == 429);
        }
        CHECK(h.transport->bodies.size() == 4);
        CHECK(h.sleeps == std::vector<std::chrono::milliseconds>{100ms, 200ms, 400ms});
    }
    SUBCASE("exhausted retries on transport failures") {
        Harness h({{0, ""}, {0, ""}, {0, ""}, {0, ""}, {200, completion("late")}});
        CHECK_THROWS_AS(h.provider->chat(kHello), TransportError);
        CHECK(h.transport->bodies.size() == 4);
        CHECK(h.sleeps.size() == 3);
    }
    SUBCASE("zero retries") {
        auto c = test_config();
        c.max_retries = 0;
        Harness h({{500, "oops"}}, c);
        CHECK_THROWS_AS(h.provider->chat(kHello), ProviderError);
        CHECK(h.sleeps.empty());
    }
}

TEST_CASE("missing credentials") {
    ScopedEnv env("PACVD_TEST_KEY", nullptr);
    try {
        ChatCompletionProvider p(test_config(), std::make_unique<FakeTransport>());
        FAIL("expected throw");
    } catch (const AuthMissing& e) {
        CHECK(std::string(e.what()).find("PACVD_TEST_KEY") != std::string::npos);
    }
    ScopedEnv empty("PACVD_TEST_KEY", "");
    CHECK_THROWS_AS(ChatCompletionProvider(test_config(), std::make_unique<FakeTransport>()),
                    AuthMissing);
}

TEST_CASE("provider configuration") {
    const ProviderConfig d;
    CHECK(d.temperature == 0.1);
    CHECK(d.top_p == 0.95);
    CHECK(d.max_tokens == 512);
    CHECK(d.auth_env == "PACVD_API_KEY");
    CHECK(d.max_retries == 3);
    CHECK_NOTHROW(d.validate());

    const auto c = parse_provider_config(
        R"({"endpoint":"https://x/v1","model":"m","temperature":0,"timeout_ms":1500,"backoff_ms":0,"rpm":30})");
    CHECK(c.endpoint == "https://x/v1");
    CHECK(c.temperature == 0);
    CHECK(c.timeout == 1500ms);
    CHECK(c.backoff == 0ms);
    CHECK(c.rpm == 30);

    CHECK_THROWS_AS(parse_provider_config("{\"temprature\":0.1}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"temperature\":3}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"top_p\":0}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"max_tokens\":0}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"timeout_ms\":0}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"max_retries\":-1}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"max_in_flight\":0}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{\"model\":5}"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("[]"), SchemaError);
    CHECK_THROWS_AS(parse_provider_config("{"), SchemaError);
    CHECK_THROWS_AS(load_provider_config("/nonexistent/provider.json"), SchemaError);

    CHECK_THROWS_AS(make_provider("carrier-pigeon", d), SchemaError);
    CHECK_THROWS_AS(make_provider("http", d), SchemaError);
    CHECK_THROWS_AS(make_provider("mock:/nonexistent.json", d), SchemaError);
}

TEST_CASE("token bucket spacing") {
    using Clock = TokenBucket::Clock;
    const auto t0 = Clock::now();
    TokenBucket unlimited(0);
    CHECK(unlimited.reserve(t0).count() == 0);
    CHECK(unlimited.reserve(t0).count() == 0);

    TokenBucket b(60);  // one per second
    CHECK(b.reserve(t0) == 0ns);
    CHECK(b.reserve(t0) == 1s);
    CHECK(b.reserve(t0) == 2s);
    CHECK(b.reserve(t0 + 10s) == 0ns);
    CHECK(b.reserve(t0 + 10s + 250ms) == 750ms);

    TokenBucket burst(120, 3);  // 500 ms interval, three at once
    CHECK(burst.reserve(t0) == 0ns);
    CHECK(burst.reserve(t0) == 0ns);
    CHECK(burst.reserve(t0) == 0ns);
    CHECK(burst.reserve(t0) == 500ms);

    std::vector<std::chrono::milliseconds> slept;
    TokenBucket s(600, 1, [&](std::chrono::milliseconds d) { slept.push_back(d); });
    s.acquire();
    s.acquire();
    REQUIRE(slept.size() == 1);
    CHECK(slept[0] > 0ms);
    CHECK(slept[0] <= 100ms);
}

namespace {

class SlowProvider : public Provider {
  public:
    std::atomic<int> current{0}, peak{0};
    std::string id() const override { return "slow"; }
    std::string chat(const std::vector<Message>&) override {
        const int now = ++current;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(5ms);
        --current;
        return "no";
    }
};

}  // namespace

TEST_CASE("in-flight requests stay bounded") {
    auto slow = std::make_shared<SlowProvider>();
    ProviderConfig c;
    c.max_in_flight = 2;
    Gateway g(c, slow);
    const auto bundle = bundle_of(PromptStrategy::BasicPrompt);
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i)
            threads.emplace_back([&] {
                for (int k = 0; k < 4; ++k) CHECK(g.complete(bundle).label == VerdictLabel::No);
            });
    }
    CHECK(slow->peak.load() <= 2);
    CHECK(slow->peak.load() >= 1);
}

TEST_CASE("transcript round-trip") {
    Verdict v;
    v.provider_id = "mock";
    v.label = VerdictLabel::Yes;
    v.raw = "yes \xE2\x80\x94 \"quoted\"\n";
    v.turns = {{"system", "s"}, {"user", "u"}, {"assistant", v.raw}};
    v.latency = 1234ms;
    const auto text = transcript_to_json(v);
    CHECK(text.find("1234") == std::string::npos);
    const auto back = transcript_from_json(text);
    CHECK(back.provider_id == v.provider_id);
    CHECK(back.label == v.label);
    CHECK(back.raw == v.raw);
    CHECK(back.turns == v.turns);
    CHECK(transcript_to_json(back) == text);
    CHECK_THROWS_AS(transcript_from_json("{}"), SchemaError);
    CHECK_THROWS_AS(
        transcript_from_json(R"({"provider":"p","label":"perhaps","raw":"","messages":[]})"),
        SchemaError);
}

TEST_CASE("HTTP transport against a local server") {
    httplib::Server server;
    std::string seen_auth, seen_body;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        if (hits++ == 0) {
            res.status = 503;
            res.set_content("{}", "application/json");
            return;
        }
        res.set_content(completion("no, nothing wrong"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ScopedEnv env("PACVD_TEST_KEY", "sk-local");
    auto c = test_config();
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.backoff = 1ms;
    auto provider = std::make_shared<ChatCompletionProvider>(c, make_http_transport());
    Gateway g(c, provider);
    const auto v = g.complete(bundle_of(PromptStrategy::BasicPrompt));
    CHECK(v.label == VerdictLabel::No);
    CHECK(hits.load() == 2);
    CHECK(seen_auth == "Bearer sk-local");
    CHECK(nlohmann::json::parse(seen_body).at("model") == "m1");

    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/missing";
    c.max_retries = 0;
    ChatCompletionProvider missing(c, make_http_transport());
    try {
        missing.chat(kHello);
        FAIL("expected throw");
    } catch (const ProviderError& e) {
        CHECK(e.status() == 404);
    }
    server.stop();
    t.join();

    c.max_retries = 1;
    ChatCompletionProvider down(c, make_http_transport());
    CHECK_THROWS_AS(down.chat(kHello), TransportError);
    CHECK_THROWS_AS(make_http_transport()->post("no-scheme", {}, "", 100ms), TransportError);
}
