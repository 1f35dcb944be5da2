#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"
#include "support/fixtures.hpp"

using namespace pacvd;
namespace fs = std::filesystem;

namespace {

std::vector<SampleRecord> fixture_dataset() {
    return load_dataset(testfx::fixture_path("eval/dataset.jsonl"));
}

std::shared_ptr<MockProvider> rule_mock() {
    return MockProvider::from_json(testfx::read_file(testfx::fixture_path("eval/mock_rule.json")));
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pacvd-test-" + name);
    fs::remove_all(p);
    return p;
}

SampleRecord layered_sample() {
    SampleRecord s;
    s.id = "layered";
    s.target_name = "top";
    s.target_code = "void top(void) { a1(); a2(); }";
    for (int d = 1; d <= 3; ++d)
        for (const char* suffix : {"x", "y"}) {
            const std::string name = "f" + std::to_string(d) + suffix;
            s.callees.push_back({name, "void " + name + "(void) { }", d});
        }
    s.callees.push_back({"deep", "void deep(void) { free(0); }", 4});
    return s;
}

// Sizes 0..n choose 2 Levenshtein with a full matrix.
std::size_t full_dp(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

}  // namespace

TEST_CASE("dataset parsing") {
    const auto samples = fixture_dataset();
    REQUIRE(samples.size() == 2);
    const auto& v = samples[0];
    CHECK(v.id == "listing1-vul");
    CHECK(v.cve == "CVE-2016-10088");
    CHECK(v.cwe == "CWE-416");
    CHECK(v.vulnerable);
    CHECK_FALSE(v.degraded);
    REQUIRE(v.callees.size() == 5);
    std::vector<int> depths;
    for (const auto& c : v.callees) depths.push_back(c.depth);
    CHECK(depths == std::vector<int>{1, 1, 2, 3, 4});
    CHECK_FALSE(samples[1].vulnerable);
    CHECK_FALSE(samples[1].cve);

    const auto again = parse_dataset(sample_to_json(v) + "\n");
    REQUIRE(again.size() == 1);
    CHECK(again[0].callees == v.callees);
    CHECK(again[0].target_code == v.target_code);

    const std::string good =
        R"({"id":"a","target_name":"f","target_code":"int f(void) { return 0; }","label":"safe"})";
    const auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_dataset(text);
        } catch (const SchemaError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of(good + "\n\n" + R"({"id":"b","target_name":"f","target_code":"x"})") == 3);
    CHECK(line_of(good + "\n{") == 2);
    CHECK(line_of(good + "\n" + good) == 2);
    CHECK(line_of(R"({"id":"a","target_name":"f","target_code":"x","label":"maybe"})") == 1);
    CHECK(line_of(R"({"id":"a","target_name":"f","target_code":"x","label":1,"callees":[{"name":"g","code":"","depth":0}]})") == 1);
    CHECK(line_of(R"({"id":"a","target_name":"f","target_code":"x","label":true,"callees":[{"name":"g","code":"","depth":1},{"name":"g","code":"","depth":2}]})") == 1);
    CHECK_THROWS_AS(load_dataset("/nonexistent/data.jsonl"), SchemaError);

    const auto labels = parse_dataset(
        R"({"id":"1","target_name":"f","target_code":"int f(void) { return 0; }","label":"yes"})"
        "\n"
        R"({"id":"2","target_name":"f","target_code":"int f(void) { return 0; }","label":0})"
        "\n"
        R"({"id":"3","target_name":"f","target_code":"int f(void) { return 0; }","label":true})");
    CHECK(labels[0].vulnerable);
    CHECK_FALSE(labels[1].vulnerable);
    CHECK(labels[2].vulnerable);

    const auto degraded = parse_dataset(
        R"({"id":"d","target_name":"f","target_code":"int f( {","label":"safe"})"
        "\n"
        R"({"id":"m","target_name":"g","target_code":"int f(void) { return 0; }","label":"safe"})");
    CHECK(degraded[0].degraded);
    CHECK(degraded[1].degraded);
}

TEST_CASE("metrics") {
    ConfusionMatrix m;
    m.tp = 3;
    m.fp = 1;
    m.fn = 2;
    m.tn = 4;
    const auto r = compute_metrics(m);
    CHECK(r.accuracy == doctest::Approx(0.7));
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.recall == doctest::Approx(0.6));
    CHECK(r.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
    CHECK(r.mcc == doctest::Approx((12.0 - 2.0) / std::sqrt(4.0 * 5 * 5 * 6)));

    const auto zero = compute_metrics(ConfusionMatrix{});
    CHECK(zero.accuracy == 0);
    CHECK(zero.f1 == 0);
    CHECK(zero.mcc == 0);

    ConfusionMatrix all_neg;
    all_neg.tn = 5;
    all_neg.fn = 5;
    CHECK(compute_metrics(all_neg).precision == 0);
    CHECK(compute_metrics(all_neg).mcc == 0);

    ConfusionMatrix c;
    c.add(true, VerdictLabel::Yes);
    c.add(true, VerdictLabel::Unparseable);
    c.add(false, VerdictLabel::Unparseable);
    c.add(false, VerdictLabel::Yes);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
    CHECK(c.fp == 1);
    CHECK(c.unparseable == 2);
    c += c;
    CHECK(c.total() == 8);
    CHECK(c.unparseable == 4);

    CHECK_THROWS_AS(score({}), EmptyInput);
    const auto s = score({{true, VerdictLabel::Yes}, {false, VerdictLabel::No}});
    CHECK(s.metrics.f1 == 1);
    CHECK(s.metrics.mcc == 1);
}

TEST_CASE("similarity measures") {
    CHECK(jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3));
    CHECK(jaccard({}, {}) == 1);
    CHECK(jaccard({"a"}, {}) == 0);
    CHECK(levenshtein(std::string("kitten"), std::string("sitting")) == 3);
    CHECK(levenshtein(std::string(""), std::string("abc")) == 3);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        std::string a, b;
        for (auto n = rng() % 9; n; --n) a += "abc"[rng() % 3];
        for (auto n = rng() % 9; n; --n) b += "abc"[rng() % 3];
        CAPTURE(a);
        CAPTURE(b);
        CHECK(levenshtein(a, b) == full_dp(a, b));
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        std::set<std::string> sa, sb;
        for (char ch : a) sa.insert(std::string(1, ch));
        for (char ch : b) sb.insert(std::string(1, ch));
        CHECK(jaccard(sa, sb) == jaccard(sb, sa));
    }

    CHECK(edit_similarity({"a", "b"}, {"a", "b"}) == 1);
    CHECK(edit_similarity({}, {}) == 1);
    CHECK(edit_similarity({"a", "b", "c", "d"}, {"a", "x"}) == doctest::Approx(0.25));

    CHECK(call_names("x = foo(a); if (b) bar (c); sizeof(int); return(0);") ==
          std::set<std::string>{"bar", "foo"});
    CHECK(code_tokens("a->b = 1;") == std::vector<std::string>{"a", "->", "b", "=", "1", ";"});
    CHECK_FALSE(code_tokens("weird \x01 text").empty());
}

TEST_CASE("BM25 ranking") {
    const std::vector<std::vector<std::string>> docs{
        {"free", "ptr", "ptr"}, {"lock", "unlock"}, {"free", "lock"}, {"alloc"}, {"ptr"}};
    const Bm25 bm(docs);
    CHECK(bm.size() == 5);
    CHECK(bm.idf("free") == doctest::Approx(std::log((5 - 2 + 0.5) / (2 + 0.5) + 1)));
    CHECK(bm.idf("missing") == doctest::Approx(std::log(5.5 / 0.5 + 1)));
    const std::vector<std::string> q{"free", "ptr"};
    std::vector<double> s;
    for (std::size_t i = 0; i < docs.size(); ++i) s.push_back(bm.score(q, i));
    CHECK(s[0] > s[2]);
    CHECK(s[0] > s[4]);
    CHECK(s[1] == 0);
    CHECK(s[3] == 0);
    // repeated query terms count once
    CHECK(bm.score({"free", "free", "ptr"}, 0) == doctest::Approx(s[0]));

    const auto comps = similarity_components("free(p);", {"free(q);", "lock(m);"});
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].bm25 == 1);
    CHECK(comps[1].bm25 == 0);
    CHECK(comps[0].call_jaccard == 1);
    CHECK(comps[0].combined() > comps[1].combined());
    CHECK(comps[0].combined({0, 0, 0, 0}) == 0);
    const auto flat = similarity_components("x", {"y", "z"});
    CHECK(flat[0].bm25 == 0);
}

TEST_CASE("context strategy names") {
    for (const char* n : {"none", "A1", "A2", "A3", "A4", "all-callees", "api-guided",
                          "similarity", "random", "hierarchy"}) {
        const auto s = parse_context_strategy(n);
        REQUIRE(s);
        CHECK(to_string(*s) == n);
    }
    CHECK(parse_context_strategy("a2")->level == AbstractionLevel::A2);
    CHECK_FALSE(parse_context_strategy("everything"));
}

TEST_CASE("raw-code context baselines") {
    const auto samples = fixture_dataset();
    const auto& s = samples[0];
    const auto& cat = default_catalog();

    CHECK(build_context(s, {ContextKind::None}, cat, 0).text.empty());

    const auto all = build_context(s, {ContextKind::AllCallees}, cat, 0);
    CHECK(all.selected == std::vector<std::string>{"blk_end_request_all", "sg_finish_rem_req",
                                                   "blk_finish_request", "__blk_put_request"});
    CHECK(all.text.rfind("// callee: blk_end_request_all (depth 1)\n", 0) == 0);
    CHECK(all.text.find("mempool_free") != std::string::npos);  // called, not included
    CHECK(all.text.find("// callee: mempool_free") == std::string::npos);

    // oracle: a callee qualifies when the analysis sees a catalog API below it
    std::vector<SourceUnit> units{parse_unit("t.c", s.target_code)};
    for (const auto& c : s.callees) units.push_back(parse_unit(c.name + ".c", c.code));
    const AnalysisContext ctx(units, cat, s.target_name, 3);
    std::vector<std::string> expected;
    for (const auto& name : all.selected)
        if (!ctx.present_apis(name).empty()) expected.push_back(name);
    const auto guided = build_context(s, {ContextKind::ApiGuided}, cat, 0);
    CHECK(guided.selected == expected);
    CHECK_FALSE(guided.selected.empty());

    const auto sim = build_context(s, {ContextKind::Similarity}, cat, 0);
    CHECK(sim.selected.size() == 3);
    CHECK_FALSE(sim.flagged);
    CHECK(sim.selected == build_context(s, {ContextKind::Similarity}, cat, 99).selected);

    const auto safe = samples[1];
    ContextOptions many;
    many.sample_size = 5;
    CHECK(build_context(safe, {ContextKind::Similarity}, cat, 0, many).flagged);
    CHECK(build_context(safe, {ContextKind::Random}, cat, 0, many).selected.size() == 3);
}

TEST_CASE("random and hierarchy samplers") {
    const auto s = layered_sample();
    const auto& cat = default_catalog();
    std::set<std::vector<std::string>> seen;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto r = build_context(s, {ContextKind::Random}, cat, seed);
        CHECK(r.selected.size() == 3);
        CHECK(r.selected == build_context(s, {ContextKind::Random}, cat, seed).selected);
        for (const auto& n : r.selected) CHECK(n != "deep");
        seen.insert(r.selected);

        const auto h = build_context(s, {ContextKind::Hierarchy}, cat, seed);
        REQUIRE(h.selected.size() == 3);
        for (int d = 0; d < 3; ++d) CHECK(h.selected[d][1] == '1' + d);
        CHECK_FALSE(h.flagged);
    }
    CHECK(seen.size() > 5);

    ContextOptions o;
    o.sample_size = 5;
    const auto h5 = build_context(s, {ContextKind::Hierarchy}, cat, 1, o);
    std::map<char, int> per_depth;
    for (const auto& n : h5.selected) ++per_depth[n[1]];
    CHECK(per_depth == std::map<char, int>{{'1', 2}, {'2', 2}, {'3', 1}});
    o.sample_size = 10;
    const auto h10 = build_context(s, {ContextKind::Hierarchy}, cat, 1, o);
    CHECK(h10.selected.size() == 6);
    CHECK(h10.flagged);
}

TEST_CASE("abstraction contexts") {
    const auto samples = fixture_dataset();
    const auto a3 = build_context(samples[0], {ContextKind::Abstraction, AbstractionLevel::A3},
                                  default_catalog(), 0);
    CHECK_FALSE(a3.flagged);
    CHECK(a3.text.find("\"free\"") != std::string::npos);

    SampleRecord broken = samples[1];
    broken.target_code = "int buf_roundtrip( {";
    broken.degraded = true;
    const auto r = build_context(broken, {ContextKind::Abstraction, AbstractionLevel::A1},
                                 default_catalog(), 0);
    CHECK(r.text.empty());
    CHECK(r.flagged);
}

TEST_CASE("sample seeds") {
    CHECK(sample_seed(1, "a") == sample_seed(1, "a"));
    CHECK(sample_seed(1, "a") != sample_seed(2, "a"));
    CHECK(sample_seed(1, "a") != sample_seed(1, "b"));
}

TEST_CASE("evaluation grid") {
    const auto samples = fixture_dataset();
    const auto& cat = default_catalog();

    SUBCASE("A1 basic separates the fixture pair") {
        auto mock = rule_mock();
        Gateway g(ProviderConfig{}, mock);
        GridOptions o;
        o.contexts = {{ContextKind::Abstraction, AbstractionLevel::A1}};
        o.strategies = {PromptStrategy::BasicPrompt};
        const auto run = run_grid(samples, cat, g, o);
        REQUIRE(run.cells.size() == 1);
        const auto& cell = run.cells[0];
        CHECK(cell.error.empty());
        CHECK(cell.overall.confusion.tp == 1);
        CHECK(cell.overall.confusion.tn == 1);
        CHECK(cell.overall.metrics.f1 == 1);
        CHECK(cell.per_cwe.size() == 2);
        CHECK(cell.per_cwe.at("CWE-416").confusion.tp == 1);
        CHECK(mock->calls() == 2);
        CHECK(run.provider_id == "mock-rule");
    }

    SUBCASE("resume replays stored verdicts without dispatching") {
        const auto dir = fresh_dir("resume");
        GridOptions o;
        o.contexts = {{ContextKind::Abstraction, AbstractionLevel::A1}, {ContextKind::None}};
        o.strategies = {PromptStrategy::BasicPrompt, PromptStrategy::ChainOfThought};
        o.out_dir = dir.string();
        o.seed = 5;
        auto first = rule_mock();
        Gateway g1(ProviderConfig{}, first);
        run_grid(samples, cat, g1, o);
        const auto run_json = testfx::read_file((dir / "run.json").string());
        const auto table = testfx::read_file((dir / "table.txt").string());
        CHECK(first->calls() == 12);

        auto second = rule_mock();
        Gateway g2(ProviderConfig{}, second);
        o.resume = true;
        const auto again = run_grid(samples, cat, g2, o);
        CHECK(second->calls() == 0);
        for (const auto& c : again.cells) CHECK(c.cache_hits == 2);
        CHECK(testfx::read_file((dir / "run.json").string()) == run_json);
        CHECK(testfx::read_file((dir / "table.txt").string()) == table);
        CHECK(std::distance(fs::directory_iterator(dir / "verdicts"), fs::directory_iterator()) == 8);

        const auto j = nlohmann::json::parse(run_json);
        CHECK(j.at("cells").size() == 4);
        CHECK(j.at("cells").at(0).at("confusion").at("tp") == 1);
        fs::remove_all(dir);
    }

    SUBCASE("empty grids fail before any dispatch") {
        auto mock = rule_mock();
        Gateway g(ProviderConfig{}, mock);
        GridOptions o;
        o.strategies = {PromptStrategy::BasicPrompt};
        CHECK_THROWS_AS(run_grid(samples, cat, g, o), EmptyInput);
        o.contexts = {{ContextKind::None}};
        CHECK_THROWS_AS(run_grid({}, cat, g, o), EmptyInput);
        CHECK(mock->calls() == 0);
    }

    SUBCASE("a failing cell does not stop the others") {
        auto mock = rule_mock();
        Gateway g(ProviderConfig{}, mock);
        GridOptions o;
        o.contexts = {{ContextKind::None}};
        o.strategies = {PromptStrategy::FewShotRandom, PromptStrategy::BasicPrompt};
        const auto run = run_grid(samples, cat, g, o);
        REQUIRE(run.cells.size() == 2);
        CHECK(run.cells[0].error.find("need 2 exemplars") != std::string::npos);
        CHECK(run.cells[1].error.empty());
        const auto table = format_table(run);
        CHECK(table.find("error: sample listing1-vul") != std::string::npos);
        CHECK(nlohmann::json::parse(run_to_json(run)).at("cells").at(0).at("status") == "error");
    }

    SUBCASE("strict mocks surface unscripted prompts as cell errors") {
        auto strict = std::make_shared<MockProvider>();
        strict->set_strict(true);
        Gateway g(ProviderConfig{}, strict);
        GridOptions o;
        o.contexts = {{ContextKind::None}};
        o.strategies = {PromptStrategy::BasicPrompt};
        const auto run = run_grid(samples, cat, g, o);
        CHECK(run.cells[0].error.find("no scripted reply") != std::string::npos);
    }

    SUBCASE("results do not depend on concurrency") {
        std::vector<SampleRecord> many;
        for (int copy = 0; copy < 6; ++copy)
            for (auto s : samples) {
                s.id += "-" + std::to_string(copy);
                many.push_back(s);
            }
        GridOptions o;
        o.contexts = {{ContextKind::Abstraction, AbstractionLevel::A3}, {ContextKind::Random}};
        o.strategies = {PromptStrategy::BasicPrompt, PromptStrategy::FewShotRandom};
        o.seed = 9;
        std::string reference;
        for (std::size_t workers : {1, 8}) {
            Gateway g(ProviderConfig{}, rule_mock());
            o.concurrency = workers;
            const auto out = run_to_json(run_grid(many, cat, g, o));
            if (reference.empty()) reference = out;
            CHECK(out == reference);
        }
    }
}
