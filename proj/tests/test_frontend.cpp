#include <doctest.h>

#include <random>
#include <set>

#include "pacvd/errors.hpp"
#include "pacvd/frontend.hpp"
#include "support/cgen.hpp"
#include "support/fixtures.hpp"

using namespace pacvd;

TEST_CASE("minimal function") {
    const auto u = parse_unit("t.c", "int f(void) { return 0; }");
    REQUIRE(u.functions.size() == 1);
    CHECK(u.functions[0].name == "f");
    CHECK(u.functions[0].params.empty());
    CHECK(dump(u.functions[0].body) == "(block (return value=(lit '0')))");
}

TEST_CASE("prototypes, globals and aggregates are skipped") {
    const auto u = parse_unit("t.c",
                              "struct s { int a; };\n"
                              "typedef struct s s_t;\n"
                              "static int counter = 3;\n"
                              "int g(int x);\n"
                              "int g(int x) { return x + counter; }\n");
    REQUIRE(u.functions.size() == 1);
    CHECK(u.functions[0].name == "g");
    REQUIRE(u.functions[0].params.size() == 1);
    CHECK(u.functions[0].params[0].name == "x");
    CHECK(u.functions[0].params[0].type_text == "int");
}

TEST_CASE("listing fixture functions") {
    const auto units = testfx::listing1_units();
    CHECK(units[0].find("sg_common_write"));
    CHECK(units[0].find("sg_finish_rem_req"));
    CHECK(units[1].find("blk_end_request_all"));
    CHECK(units[1].find("blk_finish_request"));
    CHECK(units[1].find("__blk_put_request"));
    CHECK(units[2].find("mempool_free"));

    const auto calls = extract_calls(*units[0].find("sg_common_write"));
    std::vector<std::string> names;
    for (const auto& c : calls) names.push_back(c.callee);
    CHECK(names == std::vector<std::string>{"sg_start_req", "atomic_read", "blk_end_request_all",
                                            "sg_finish_rem_req", "blk_execute_rq_nowait"});
    for (const auto& u : units)
        for (const auto& f : u.functions) {
            CHECK(f.span.begin < f.span.end);
            CHECK(f.span.end <= u.text.size());
        }
}

TEST_CASE("malformed input reports a position") {
    try {
        parse_unit("t.c", "int f() { if (x");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.column() >= 15);
    }
    CHECK_THROWS_AS(parse_unit("t.c", "int f() { return 1 }"), ParseError);
    CHECK_THROWS_AS(parse_unit("t.c", "int f() { /* open"), ParseError);
    CHECK_THROWS_AS(parse_unit("t.c", "int f() { switch (a) { case 1: case 1: break; } }"),
                    ParseError);
}

TEST_CASE("invalid UTF-8 is rejected") {
    CHECK_THROWS_AS(parse_unit("t.c", std::string("int f() { return 0; } \xC0\xAF")),
                    EncodingError);
    CHECK_THROWS_AS(parse_unit("t.c", std::string("/* \xED\xA0\x80 */")), EncodingError);
    CHECK_NOTHROW(parse_unit("t.c", "/* caf\xC3\xA9 */ int f() { return 0; }"));
}

TEST_CASE("extract_calls order and paths") {
    SUBCASE("single call") {
        const auto u = parse_unit("t.c", "void f(int *p) { free(p); }");
        const auto calls = extract_calls(u.functions[0]);
        REQUIRE(calls.size() == 1);
        CHECK(calls[0].callee == "free");
        REQUIRE(calls[0].args.size() == 1);
        CHECK(dump(calls[0].args[0]) == "(ident 'p')");
        REQUIRE(calls[0].path.size() == 2);
        CHECK(calls[0].path[0].kind == StmtKind::Block);
        CHECK(calls[0].path[1].kind == StmtKind::ExprStmt);
    }
    SUBCASE("nested calls evaluate inner first") {
        const auto u = parse_unit("t.c", "void f(int x) { g(h(x)); }");
        const auto calls = extract_calls(u.functions[0]);
        REQUIRE(calls.size() == 2);
        CHECK(calls[0].callee == "h");
        CHECK(calls[1].callee == "g");
    }
    SUBCASE("guarded free carries the if in its path") {
        const auto units = testfx::listing1_units();
        const auto calls = extract_calls(*units[0].find("sg_finish_rem_req"));
        REQUIRE(calls.size() == 2);
        CHECK(calls[0].callee == "free");
        int ifs = 0;
        for (const auto& step : calls[0].path) ifs += step.kind == StmtKind::If;
        CHECK(ifs == 2);
    }
    SUBCASE("indirect calls are skipped") {
        const auto u = parse_unit("t.c", "void f(struct r *rq) { rq->end_io(rq, g(1)); }");
        const auto calls = extract_calls(u.functions[0]);
        REQUIRE(calls.size() == 1);
        CHECK(calls[0].callee == "g");
    }
}

TEST_CASE("statement forms") {
    const char* src =
        "int f(struct s *p, int n, char buf[16], ...) {\n"
        "  int i, *q = 0, a[4] = {1, 2};\n"
        "  for (i = 0; i < n; i++) { if (!p) continue; else break; }\n"
        "  do { n--; } while (n > 0);\n"
        "  switch (n) { case 1: n = 2; case 2: break; default: n = (int)sizeof(struct s); }\n"
        "out:\n"
        "  q = n ? &a[0] : (int *)p->buf;\n"
        "  return p->a.b[2] + sizeof n;\n"
        "}\n";
    const auto u = parse_unit("t.c", src);
    REQUIRE(u.functions.size() == 1);
    const auto& fn = u.functions[0];
    CHECK(fn.params.size() == 3);
    const auto again = parse_unit("t.c", print_unit(u));
    REQUIRE(again.functions.size() == 1);
    CHECK(dump(again.functions[0]) == dump(fn));
}

TEST_CASE("unknown statements degrade to opaque") {
    const auto u = parse_unit("t.c", "void f(void) { a = 1; asm volatile(\"nop\" ::: \"memory\"); b = 2; }");
    REQUIRE(u.functions.size() == 1);
    const auto& body = u.functions[0].body.body;
    REQUIRE(body.size() == 3);
    CHECK(body[1].kind == StmtKind::Opaque);
}

TEST_CASE("round trip on generated programs") {
    for (std::uint64_t seed = 1; seed <= 150; ++seed) {
        testgen::ProgramGen gen(seed, {});
        const std::string src = gen.function("f") + gen.function("g");
        const auto u = parse_unit("gen.c", src);
        REQUIRE(u.functions.size() == 2);
        const std::string printed = print_unit(u);
        const auto v = parse_unit("gen.c", printed);
        REQUIRE(v.functions.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) CHECK(dump(v.functions[i]) == dump(u.functions[i]));
        CHECK(print_unit(v) == printed);
    }
}

TEST_CASE("call extraction matches a token-level count") {
    const std::vector<std::string> names = {"free", "malloc", "helper", "log_event"};
    for (std::uint64_t seed = 1; seed <= 150; ++seed) {
        testgen::ProgramGen gen(seed * 7919, {});
        const std::string src = gen.function("f");
        const auto toks = lex::tokenize(src);
        std::size_t expected = 0;
        for (std::size_t i = 0; i + 1 < toks.size(); ++i)
            if (toks[i].kind == lex::TokenKind::Ident && toks[i + 1].text == "(" &&
                std::find(names.begin(), names.end(), toks[i].text) != names.end())
                ++expected;
        const auto u = parse_unit("gen.c", src);
        CHECK(extract_calls(u.functions[0]).size() == expected);
    }
}

TEST_CASE("parser never crashes on arbitrary bytes") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> byte(0, 255);
    const std::string base = testgen::ProgramGen(3, {}).function("f");
    for (int round = 0; round < 600; ++round) {
        std::string text;
        if (round % 2 == 0) {
            const int n = std::uniform_int_distribution<int>(0, 200)(rng);
            for (int i = 0; i < n; ++i) text += static_cast<char>(byte(rng));
        } else {
            text = base;
            const int edits = 1 + round % 5;
            for (int i = 0; i < edits && !text.empty(); ++i) {
                const std::size_t at =
                    std::uniform_int_distribution<std::size_t>(0, text.size() - 1)(rng);
                switch (i % 3) {
                    case 0: text.erase(at, 1); break;
                    case 1: text.insert(at, 1, "{}();,*"[byte(rng) % 7]); break;
                    default: text[at] = static_cast<char>(byte(rng)); break;
                }
            }
        }
        try {
            parse_unit("fuzz.c", text);
        } catch (const ParseError&) {
        } catch (const EncodingError&) {
        }
    }
    // deep nesting is bounded rather than overflowing the stack; the statement degrades
    const std::string deep =
        "int f() { return " + std::string(5000, '(') + "1" + std::string(5000, ')') + "; }";
    const auto u = parse_unit("deep.c", deep);
    REQUIRE(u.functions.size() == 1);
    CHECK(u.functions[0].body.body[0].kind == StmtKind::Opaque);
    CHECK_THROWS_AS(parse_unit("deep.c", "int f() " + std::string(5000, '{')), ParseError);
}

TEST_CASE("access path helpers") {
    const auto u = parse_unit("t.c", "void f(struct s *srp) { free(srp->rq->cmd); g(*p, q[2], (r)); }");
    const auto calls = extract_calls(u.functions[0]);
    const Expr& arg = calls[0].args[0];
    REQUIRE(root_ident(arg));
    CHECK(root_ident(arg)->text == "srp");
    CHECK(is_access_path(arg));
    CHECK(root_ident(calls[1].args[0])->text == "p");
    CHECK(root_ident(calls[1].args[1])->text == "q");
    CHECK_FALSE(is_access_path(calls[1].args[0]));
    const Expr sub = substitute_root(arg, calls[1].args[1]);
    CHECK(print_expr(sub) == "q[2]->rq->cmd");
}
