#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "pacvd/errors.hpp"
#include "pacvd/frontend.hpp"

namespace pacvd {

namespace {

using lex::Token;
using lex::TokenKind;

constexpr int kMaxNesting = 256;

bool is_type_keyword(std::string_view w) {
    static const std::set<std::string_view> words = {
        "void",     "char",       "short",    "int",        "long",     "float",
        "double",   "signed",     "unsigned", "_Bool",      "bool",     "const",
        "volatile", "static",     "register", "extern",     "auto",     "inline",
        "restrict", "struct",     "union",    "enum",       "__restrict", "__const",
        "__inline", "__inline__", "typedef",  "__volatile__",
    };
    return words.count(w) != 0;
}

bool is_qualifier(std::string_view w) {
    return w == "const" || w == "volatile" || w == "restrict" || w == "__restrict" ||
           w == "__const";
}

bool is_assign_op(std::string_view op) {
    return op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "%=" ||
           op == "&=" || op == "|=" || op == "^=" || op == "<<=" || op == ">>=";
}

int binary_precedence(std::string_view op) {
    if (op == "||") return 4;
    if (op == "&&") return 5;
    if (op == "|") return 6;
    if (op == "^") return 7;
    if (op == "&") return 8;
    if (op == "==" || op == "!=") return 9;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 10;
    if (op == "<<" || op == ">>") return 11;
    if (op == "+" || op == "-") return 12;
    if (op == "*" || op == "/" || op == "%") return 13;
    return -1;
}

std::string join_tokens(const std::vector<Token>& toks, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        const auto& t = toks[i].text;
        if (!out.empty()) {
            const bool glue = t == "*" || t == "[" || t == "]" || out.back() == '*' ||
                              out.back() == '[';
            if (!glue || (t == "*" && out.back() != '*')) out += ' ';
        }
        out += t;
    }
    return out;
}

class Parser {
  public:
    Parser(const std::vector<Token>& toks, SourceUnit& unit) : toks_(toks), unit_(unit) {}

    void parse_translation_unit() {
        std::set<std::string> seen;
        while (!at_end()) {
            const std::size_t start = pos_;
            int paren = 0;
            while (!at_end()) {
                const auto& t = peek();
                if (t.kind == TokenKind::Punct) {
                    if (t.text == "(" || t.text == "[") ++paren;
                    else if (t.text == ")" || t.text == "]") --paren;
                    else if (paren == 0 && (t.text == ";" || t.text == "{")) break;
                    else if (t.text == "}") fail("a declaration");
                }
                advance();
            }
            if (at_end()) {
                if (pos_ > start) fail("';'");
                break;
            }
            if (peek().text == ";") {
                advance();
                continue;
            }
            // '{' at file scope: function body when preceded by a parameter list
            if (pos_ > start && toks_[pos_ - 1].text == ")") {
                auto fn = parse_function(start);
                if (!seen.insert(fn.name).second) {
                    unit_.warnings.push_back("duplicate definition of " + fn.name +
                                             " ignored");
                    continue;
                }
                unit_.functions.push_back(std::move(fn));
                continue;
            }
            skip_balanced("{", "}");
            while (!at_end() && peek().text != ";") {
                if (peek().text == "{") skip_balanced("{", "}");
                else if (peek().text == "}") fail("';'");
                else advance();
            }
            if (at_end()) fail("';'");
            advance();
        }
    }

  private:
    const std::vector<Token>& toks_;
    SourceUnit& unit_;
    std::size_t pos_ = 0;
    int nesting_ = 0;

    struct NestGuard {
        Parser& p;
        explicit NestGuard(Parser& parser) : p(parser) {
            if (++p.nesting_ > kMaxNesting) {
                --p.nesting_;
                p.fail("shallower nesting");
            }
        }
        ~NestGuard() { --p.nesting_; }
    };

    const Token& peek(std::size_t k = 0) const {
        return toks_[std::min(pos_ + k, toks_.size() - 1)];
    }
    bool at_end() const { return peek().kind == TokenKind::End; }
    bool at(std::string_view text) const {
        return peek().kind == TokenKind::Punct && peek().text == text;
    }
    bool at_word(std::string_view text) const {
        return peek().kind == TokenKind::Ident && peek().text == text;
    }
    const Token& advance() {
        const Token& t = peek();
        if (!at_end()) ++pos_;
        return t;
    }
    std::size_t prev_end() const {
        if (pos_ == 0) return 0;
        const auto& t = toks_[pos_ - 1];
        return t.offset + t.text.size();
    }

    [[noreturn]] void fail(const std::string& expected) const {
        const auto& t = peek();
        throw ParseError(t.line, t.column, expected,
                         t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'");
    }

    const Token& expect(std::string_view text) {
        if (!at(text)) fail("'" + std::string(text) + "'");
        return advance();
    }

    void skip_balanced(std::string_view open, std::string_view close) {
        int depth = 0;
        do {
            if (at_end()) fail("'" + std::string(close) + "'");
            if (at(open)) ++depth;
            else if (at(close)) --depth;
            advance();
        } while (depth > 0);
    }

    // ---- functions -------------------------------------------------------

    FunctionAst parse_function(std::size_t start) {
        const std::size_t close = pos_ - 1;
        std::size_t open = close;
        int depth = 0;
        for (std::size_t i = close + 1; i-- > start;) {
            if (toks_[i].text == ")") ++depth;
            else if (toks_[i].text == "(") --depth;
            if (depth == 0) {
                open = i;
                break;
            }
        }
        if (open == start || toks_[open - 1].kind != TokenKind::Ident ||
            lex::is_keyword(toks_[open - 1].text)) {
            pos_ = open;
            fail("a function name");
        }
        FunctionAst fn;
        fn.name = toks_[open - 1].text;
        fn.return_type = join_tokens(toks_, start, open - 1);
        fn.params = parse_params(open + 1, close);
        fn.span.begin = toks_[start].offset;
        fn.body = parse_block();
        fn.span.end = prev_end();
        return fn;
    }

    std::vector<Param> parse_params(std::size_t from, std::size_t to) const {
        std::vector<Param> params;
        std::size_t seg = from;
        int depth = 0;
        auto flush = [&](std::size_t end) {
            if (end == seg) return;
            if (end - seg == 1 && toks_[seg].text == "void") return;
            if (end - seg == 1 && toks_[seg].text == "...") return;
            std::optional<std::size_t> name_at;
            for (std::size_t i = seg; i + 3 < end + 1 && i + 2 < end; ++i) {
                if (toks_[i].text == "(" && toks_[i + 1].text == "*" &&
                    toks_[i + 2].kind == TokenKind::Ident) {
                    name_at = i + 2;
                    break;
                }
            }
            if (!name_at) {
                std::size_t limit = end;
                for (std::size_t i = seg; i < end; ++i)
                    if (toks_[i].text == "[") {
                        limit = i;
                        break;
                    }
                for (std::size_t i = limit; i-- > seg;) {
                    if (toks_[i].kind == TokenKind::Ident && !lex::is_keyword(toks_[i].text)) {
                        name_at = i;
                        break;
                    }
                }
                // a lone typedef name (`size_t`) is an unnamed parameter
                if (name_at && *name_at == seg) {
                    bool only_quals = true;
                    for (std::size_t i = seg + 1; i < end; ++i)
                        if (toks_[i].text != "*" && !is_qualifier(toks_[i].text)) only_quals = false;
                    if (only_quals) name_at.reset();
                }
                if (name_at) {
                    bool has_type = false;
                    for (std::size_t i = seg; i < *name_at; ++i)
                        if (toks_[i].kind == TokenKind::Ident && !is_qualifier(toks_[i].text))
                            has_type = true;
                    if (!has_type) name_at.reset();
                }
            }
            Param p;
            if (name_at) {
                p.name = toks_[*name_at].text;
                std::string type = join_tokens(toks_, seg, *name_at);
                const std::string rest = join_tokens(toks_, *name_at + 1, end);
                if (!rest.empty()) type += rest;
                p.type_text = type;
            } else {
                p.type_text = join_tokens(toks_, seg, end);
            }
            params.push_back(std::move(p));
        };
        for (std::size_t i = from; i < to; ++i) {
            const auto& t = toks_[i].text;
            if (t == "(" || t == "[") ++depth;
            else if (t == ")" || t == "]") --depth;
            else if (t == "," && depth == 0) {
                flush(i);
                seg = i + 1;
            }
        }
        flush(to);
        return params;
    }

    // ---- statements ------------------------------------------------------

    Stmt parse_block() {
        NestGuard guard(*this);
        Stmt block;
        block.kind = StmtKind::Block;
        block.span.begin = peek().offset;
        expect("{");
        while (!at("}")) {
            if (at_end()) fail("'}'");
            parse_statement_recovering(block.body);
        }
        advance();
        block.span.end = prev_end();
        return block;
    }

    /// Parses one statement; on failure degrades it to an opaque statement when a terminating
    /// ';' can be found without leaving the enclosing block.
    void parse_statement_recovering(std::vector<Stmt>& out) {
        const std::size_t start = pos_;
        const std::size_t mark = out.size();
        try {
            parse_statement(out);
            return;
        } catch (const ParseError&) {
            out.resize(mark);
            const std::size_t failed_at = pos_;
            pos_ = start;
            if (!skip_to_semicolon()) {
                pos_ = failed_at;
                throw;
            }
        }
        out.push_back(make_opaque(start));
    }

    Stmt make_opaque(std::size_t start_tok) {
        Stmt s;
        s.kind = StmtKind::Opaque;
        s.span = {toks_[start_tok].offset, prev_end()};
        s.text = std::string(
            std::string_view(unit_.text).substr(s.span.begin, s.span.end - s.span.begin));
        unit_.warnings.push_back(std::to_string(toks_[start_tok].line) + ":" +
                                 std::to_string(toks_[start_tok].column) +
                                 ": statement kept as opaque text");
        return s;
    }

    bool skip_to_semicolon() {
        int depth = 0;
        while (!at_end()) {
            const auto& t = peek();
            if (t.kind == TokenKind::Punct) {
                if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
                else if (t.text == ")" || t.text == "]" || t.text == "}") {
                    if (depth == 0) return false;
                    --depth;
                } else if (t.text == ";" && depth == 0) {
                    advance();
                    return true;
                }
            }
            advance();
        }
        return false;
    }

    Stmt single(std::vector<Stmt> stmts, std::size_t begin) {
        if (stmts.size() == 1) return std::move(stmts.front());
        Stmt block;
        block.kind = StmtKind::Block;
        block.span = {begin, prev_end()};
        block.body = std::move(stmts);
        return block;
    }

    Stmt parse_sub_statement() {
        const std::size_t begin = peek().offset;
        std::vector<Stmt> out;
        parse_statement_recovering(out);
        return single(std::move(out), begin);
    }

    bool decl_start() const {
        const auto& t0 = peek();
        if (t0.kind != TokenKind::Ident) return false;
        if (is_type_keyword(t0.text)) return true;
        if (lex::is_keyword(t0.text)) return false;
        const auto& t1 = peek(1);
        if (t1.kind == TokenKind::Ident && !lex::is_keyword(t1.text)) return true;
        if (t1.kind == TokenKind::Ident && is_qualifier(t1.text)) return true;
        if (t1.text == "*") {
            std::size_t k = 1;
            while (peek(k).text == "*" || is_qualifier(peek(k).text)) ++k;
            const auto& name = peek(k);
            const auto& after = peek(k + 1);
            return name.kind == TokenKind::Ident && !lex::is_keyword(name.text) &&
                   (after.text == "=" || after.text == ";" || after.text == "," ||
                    after.text == "[");
        }
        return false;
    }

    void parse_statement(std::vector<Stmt>& out) {
        NestGuard guard(*this);
        const auto& t = peek();
        const std::size_t begin = t.offset;
        Stmt s;
        s.span.begin = begin;

        if (at("{")) {
            out.push_back(parse_block());
            return;
        }
        if (at(";")) {
            advance();
            s.kind = StmtKind::Block;
            s.span.end = prev_end();
            out.push_back(std::move(s));
            return;
        }
        if (t.kind == TokenKind::Ident) {
            const std::string word = t.text;
            if (word == "if") {
                advance();
                expect("(");
                s.kind = StmtKind::If;
                s.cond = parse_expression();
                expect(")");
                s.body.push_back(parse_sub_statement());
                if (at_word("else")) {
                    advance();
                    s.body.push_back(parse_sub_statement());
                }
            } else if (word == "while") {
                advance();
                expect("(");
                s.kind = StmtKind::While;
                s.cond = parse_expression();
                expect(")");
                s.body.push_back(parse_sub_statement());
            } else if (word == "do") {
                advance();
                s.kind = StmtKind::DoWhile;
                s.body.push_back(parse_sub_statement());
                if (!at_word("while")) fail("'while'");
                advance();
                expect("(");
                s.cond = parse_expression();
                expect(")");
                expect(";");
            } else if (word == "for") {
                advance();
                expect("(");
                s.kind = StmtKind::For;
                if (at(";")) {
                    advance();
                } else if (decl_start()) {
                    parse_declaration(s.init);
                } else {
                    Stmt init;
                    init.kind = StmtKind::ExprStmt;
                    init.span.begin = peek().offset;
                    init.value = parse_expression();
                    init.span.end = prev_end();
                    expect(";");
                    s.init.push_back(std::move(init));
                }
                if (!at(";")) s.cond = parse_expression();
                expect(";");
                if (!at(")")) s.value = parse_expression();
                expect(")");
                s.body.push_back(parse_sub_statement());
            } else if (word == "switch") {
                advance();
                expect("(");
                s.kind = StmtKind::Switch;
                s.cond = parse_expression();
                expect(")");
                parse_switch_body(s);
            } else if (word == "return") {
                advance();
                s.kind = StmtKind::Return;
                if (!at(";")) s.value = parse_expression();
                expect(";");
            } else if (word == "break" || word == "continue") {
                advance();
                s.kind = word == "break" ? StmtKind::Break : StmtKind::Continue;
                expect(";");
            } else if (word == "goto" || word == "asm" || word == "__asm__" || word == "__asm") {
                const std::size_t start = pos_;
                if (!skip_to_semicolon()) fail("';'");
                out.push_back(make_opaque(start));
                return;
            } else if (word == "case" || word == "default" || word == "else") {
                fail("a statement");
            } else if (!lex::is_keyword(word) && peek(1).text == ":") {
                // label
                advance();
                advance();
                if (at("}")) {
                    s.kind = StmtKind::Block;
                    s.span.end = prev_end();
                    out.push_back(std::move(s));
                    return;
                }
                parse_statement(out);
                return;
            } else if (decl_start()) {
                parse_declaration(out);
                return;
            } else {
                s.kind = StmtKind::ExprStmt;
                s.value = parse_expression();
                expect(";");
            }
        } else {
            s.kind = StmtKind::ExprStmt;
            s.value = parse_expression();
            expect(";");
        }
        s.span.end = prev_end();
        out.push_back(std::move(s));
    }

    void parse_switch_body(Stmt& sw) {
        expect("{");
        std::set<std::string> labels;
        bool has_default = false;
        while (!at("}")) {
            if (at_end()) fail("'}'");
            if (at_word("case") || at_word("default")) {
                SwitchCase c;
                c.span.begin = peek().offset;
                if (at_word("case")) {
                    advance();
                    const auto& label_tok = peek();
                    c.label = parse_conditional();
                    if (!labels.insert(dump(*c.label)).second)
                        throw ParseError(label_tok.line, label_tok.column, "a distinct case label",
                                         "duplicate '" + print_expr(*c.label) + "'");
                } else {
                    if (has_default) fail("at most one 'default'");
                    has_default = true;
                    advance();
                }
                expect(":");
                c.span.end = prev_end();
                sw.cases.push_back(std::move(c));
                continue;
            }
            if (sw.cases.empty()) fail("'case' or 'default'");
            parse_statement_recovering(sw.cases.back().body);
            sw.cases.back().span.end = prev_end();
        }
        advance();
    }

    void parse_declaration(std::vector<Stmt>& out) {
        const std::size_t type_from = pos_;
        bool have_type_name = false;
        while (true) {
            const auto& t = peek();
            if (t.kind != TokenKind::Ident) break;
            if (t.text == "struct" || t.text == "union" || t.text == "enum") {
                advance();
                if (peek().kind == TokenKind::Ident) advance();
                if (at("{")) fail("a declarator");
                have_type_name = true;
                continue;
            }
            if (is_type_keyword(t.text)) {
                if (!is_qualifier(t.text) && t.text != "static" && t.text != "register" &&
                    t.text != "extern" && t.text != "auto" && t.text != "inline")
                    have_type_name = true;
                advance();
                continue;
            }
            if (!have_type_name && !lex::is_keyword(t.text)) {
                have_type_name = true;
                advance();
                continue;
            }
            break;
        }
        if (pos_ == type_from) fail("a type");
        const std::string base = join_tokens(toks_, type_from, pos_);
        while (true) {
            Stmt d;
            d.kind = StmtKind::Decl;
            d.span.begin = toks_[type_from].offset;
            std::string stars;
            while (at("*") || (peek().kind == TokenKind::Ident && is_qualifier(peek().text))) {
                if (at("*")) stars += "*";
                advance();
            }
            if (peek().kind != TokenKind::Ident || lex::is_keyword(peek().text))
                fail("a declarator name");
            d.name = advance().text;
            std::string dims;
            while (at("[")) {
                const std::size_t from = pos_;
                skip_balanced("[", "]");
                dims += join_tokens(toks_, from, pos_);
            }
            if (at("(")) fail("a variable declarator");
            d.type_text = base + (stars.empty() ? "" : " " + stars) + dims;
            if (at("=")) {
                advance();
                d.value = at("{") ? parse_init_list() : parse_assignment();
            }
            d.span.end = prev_end();
            out.push_back(std::move(d));
            if (at(",")) {
                advance();
                continue;
            }
            expect(";");
            out.back().span.end = prev_end();
            return;
        }
    }

    // ---- expressions -----------------------------------------------------

    Expr finish(Expr e, std::size_t begin) {
        e.span = {begin, prev_end()};
        return e;
    }

    Expr parse_expression() {
        const std::size_t begin = peek().offset;
        Expr e = parse_assignment();
        while (at(",")) {
            advance();
            Expr rhs = parse_assignment();
            e = finish(Expr::binary(",", std::move(e), std::move(rhs)), begin);
        }
        return e;
    }

    Expr parse_assignment() {
        NestGuard guard(*this);
        const std::size_t begin = peek().offset;
        Expr lhs = parse_conditional();
        if (peek().kind == TokenKind::Punct && is_assign_op(peek().text)) {
            const std::string op = advance().text;
            Expr rhs = parse_assignment();
            Expr e;
            e.kind = ExprKind::Assign;
            e.text = op;
            e.operands.push_back(std::move(lhs));
            e.operands.push_back(std::move(rhs));
            return finish(std::move(e), begin);
        }
        return lhs;
    }

    Expr parse_conditional() {
        const std::size_t begin = peek().offset;
        Expr c = parse_binary(4);
        if (!at("?")) return c;
        advance();
        Expr then = parse_expression();
        expect(":");
        Expr other = parse_conditional();
        Expr e;
        e.kind = ExprKind::Conditional;
        e.operands.push_back(std::move(c));
        e.operands.push_back(std::move(then));
        e.operands.push_back(std::move(other));
        return finish(std::move(e), begin);
    }

    Expr parse_binary(int min_prec) {
        NestGuard guard(*this);
        const std::size_t begin = peek().offset;
        Expr lhs = parse_unary();
        while (peek().kind == TokenKind::Punct) {
            const int prec = binary_precedence(peek().text);
            if (prec < min_prec) break;
            const std::string op = advance().text;
            Expr rhs = parse_binary(prec + 1);
            lhs = finish(Expr::binary(op, std::move(lhs), std::move(rhs)), begin);
        }
        return lhs;
    }

    bool type_name_start(std::size_t k) const {
        const auto& t = peek(k);
        if (t.kind != TokenKind::Ident) return false;
        if (is_type_keyword(t.text)) return true;
        if (lex::is_keyword(t.text)) return false;
        // typedef name followed by pointer stars and ')'
        std::size_t j = k + 1;
        bool star = false;
        while (peek(j).text == "*") {
            star = true;
            ++j;
        }
        if (star && peek(j).text == ")") return true;
        if (peek(k + 1).text == ")") {
            if (t.text.size() > 2 && t.text.ends_with("_t")) return true;
            const auto& after = peek(k + 2);
            return after.kind == TokenKind::Ident || after.kind == TokenKind::Number ||
                   after.kind == TokenKind::String || after.kind == TokenKind::Char ||
                   after.text == "(";
        }
        return false;
    }

    std::string parse_type_name() {
        const std::size_t from = pos_;
        int depth = 0;
        while (!at_end()) {
            if (at("(") || at("[")) ++depth;
            if (at(")") || at("]")) {
                if (depth == 0) break;
                --depth;
            }
            advance();
        }
        if (pos_ == from) fail("a type name");
        return join_tokens(toks_, from, pos_);
    }

    Expr parse_unary() {
        NestGuard guard(*this);
        const std::size_t begin = peek().offset;
        const auto& t = peek();
        if (t.kind == TokenKind::Punct &&
            (t.text == "++" || t.text == "--" || t.text == "&" || t.text == "*" ||
             t.text == "+" || t.text == "-" || t.text == "~" || t.text == "!")) {
            const std::string op = advance().text;
            Expr operand = parse_unary();
            return finish(Expr::unary(op, std::move(operand)), begin);
        }
        if (t.kind == TokenKind::Ident && t.text == "sizeof") {
            advance();
            if (at("(") && type_name_start(1) && peek(1).text != "(") {
                advance();
                Expr e;
                e.kind = ExprKind::SizeofType;
                e.type_text = parse_type_name();
                expect(")");
                return finish(std::move(e), begin);
            }
            Expr operand = parse_unary();
            return finish(Expr::unary("sizeof", std::move(operand)), begin);
        }
        if (at("(") && type_name_start(1)) {
            advance();
            Expr e;
            e.kind = ExprKind::Cast;
            e.type_text = parse_type_name();
            expect(")");
            if (at("{")) fail("an expression (compound literals are not supported)");
            e.operands.push_back(parse_unary());
            return finish(std::move(e), begin);
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        const std::size_t begin = peek().offset;
        Expr e = parse_primary();
        while (true) {
            if (at("[")) {
                advance();
                Expr sub = parse_expression();
                expect("]");
                Expr idx;
                idx.kind = ExprKind::Index;
                idx.operands.push_back(std::move(e));
                idx.operands.push_back(std::move(sub));
                e = finish(std::move(idx), begin);
            } else if (at("(")) {
                advance();
                Expr call;
                if (e.kind == ExprKind::Ident && !e.parenthesized) {
                    call.kind = ExprKind::Call;
                    call.text = e.text;
                } else {
                    call.kind = ExprKind::IndirectCall;
                    call.operands.push_back(std::move(e));
                }
                if (!at(")")) {
                    while (true) {
                        call.operands.push_back(parse_assignment());
                        if (!at(",")) break;
                        advance();
                    }
                }
                expect(")");
                e = finish(std::move(call), begin);
            } else if (at(".") || at("->")) {
                const bool arrow = advance().text == "->";
                if (peek().kind != TokenKind::Ident) fail("a member name");
                Expr m;
                m.kind = ExprKind::Member;
                m.arrow = arrow;
                m.text = advance().text;
                m.operands.push_back(std::move(e));
                e = finish(std::move(m), begin);
            } else if (at("++") || at("--")) {
                const std::string op = advance().text;
                Expr u = Expr::unary(op, std::move(e));
                u.postfix = true;
                e = finish(std::move(u), begin);
            } else {
                break;
            }
        }
        return e;
    }

    Expr parse_primary() {
        const std::size_t begin = peek().offset;
        const auto& t = peek();
        switch (t.kind) {
            case TokenKind::Ident: {
                if (lex::is_keyword(t.text)) fail("an expression");
                Expr e = Expr::ident(advance().text);
                return finish(std::move(e), begin);
            }
            case TokenKind::Number:
            case TokenKind::Char: {
                Expr e;
                e.kind = ExprKind::Literal;
                e.text = advance().text;
                return finish(std::move(e), begin);
            }
            case TokenKind::String: {
                Expr e;
                e.kind = ExprKind::Literal;
                e.text = advance().text;
                while (peek().kind == TokenKind::String) e.text += " " + advance().text;
                return finish(std::move(e), begin);
            }
            case TokenKind::Punct:
                if (t.text == "(") {
                    advance();
                    Expr e = parse_expression();
                    expect(")");
                    e.parenthesized = true;
                    e.span = {begin, prev_end()};
                    return e;
                }
                break;
            case TokenKind::End:
                break;
        }
        fail("an expression");
    }

    Expr parse_init_list() {
        NestGuard guard(*this);
        const std::size_t begin = peek().offset;
        expect("{");
        Expr e;
        e.kind = ExprKind::InitList;
        while (!at("}")) {
            e.operands.push_back(at("{") ? parse_init_list() : parse_assignment());
            if (!at(",")) break;
            advance();
        }
        expect("}");
        return finish(std::move(e), begin);
    }
};

}  // namespace

SourceUnit parse_unit(std::string path, std::string text) {
    if (auto bad = find_invalid_utf8(text)) throw EncodingError(*bad);
    SourceUnit unit;
    unit.path = std::move(path);
    unit.text = std::move(text);
    const auto toks = lex::tokenize(unit.text);
    Parser parser(toks, unit);
    parser.parse_translation_unit();
    return unit;
}

}  // namespace pacvd
