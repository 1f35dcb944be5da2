#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pacvd {

/// Half-open byte range into the owning unit's text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

enum class ExprKind {
    Ident,         // text = name
    Member,        // text = field, operands = [base], arrow selects `->`
    Call,          // text = callee name, operands = arguments
    IndirectCall,  // operands = [callee expression, arguments...]
    Unary,         // text = operator, operands = [operand], postfix for x++ / x--
    Binary,        // text = operator (including ","), operands = [lhs, rhs]
    Assign,        // text = "=", "+=", ..., operands = [lhs, rhs]
    Literal,       // text = literal spelling
    Index,         // operands = [base, subscript]
    Conditional,   // operands = [cond, then, else]
    Cast,          // type_text = target type, operands = [operand]
    SizeofType,    // type_text = type operand
    InitList,      // operands = elements
};

struct Expr {
    ExprKind kind = ExprKind::Literal;
    std::string text;
    std::string type_text;
    std::vector<Expr> operands;
    bool arrow = false;
    bool postfix = false;
    bool parenthesized = false;
    Span span;

    static Expr ident(std::string name, Span span = {});
    static Expr binary(std::string op, Expr lhs, Expr rhs);
    static Expr unary(std::string op, Expr operand);
};

enum class StmtKind {
    Block,
    If,
    While,
    DoWhile,
    For,
    Switch,
    Return,
    ExprStmt,
    Decl,
    Break,
    Continue,
    Opaque,
};

struct SwitchCase;

/// Statement node. Field use by kind:
///   Block: body = statements
///   If: cond, body = [then] or [then, else]
///   While / DoWhile: cond, body = [loop body]
///   For: init = declarations or expression statement, cond?, value = step?, body = [loop body]
///   Switch: cond = scrutinee, cases
///   Return: value?
///   ExprStmt: value
///   Decl: name, type_text, value = initializer?
///   Opaque: text
struct Stmt {
    StmtKind kind = StmtKind::Block;
    Span span;
    std::optional<Expr> cond;
    std::optional<Expr> value;
    std::vector<Stmt> init;
    std::vector<Stmt> body;
    std::vector<SwitchCase> cases;
    std::string name;
    std::string type_text;
    std::string text;
};

/// One `case` (label set) or `default` (label empty) arm with the statements up to the next arm.
struct SwitchCase {
    std::optional<Expr> label;
    std::vector<Stmt> body;
    Span span;
};

struct Param {
    std::string name;
    std::string type_text;
};

struct FunctionAst {
    std::string name;
    std::string return_type;
    std::vector<Param> params;
    Stmt body;
    Span span;

    /// Index of the parameter called `name`, if any.
    std::optional<std::size_t> param_index(std::string_view name) const;
};

struct SourceUnit {
    std::string path;
    std::string text;
    std::vector<FunctionAst> functions;
    /// Non-fatal diagnostics, e.g. statements degraded to opaque text.
    std::vector<std::string> warnings;

    const FunctionAst* find(std::string_view name) const;
};

/// Parses C-subset source text. Prototypes, globals, typedefs and aggregate definitions at file
/// scope are skipped; every function definition becomes one FunctionAst.
/// Throws EncodingError on invalid UTF-8 and ParseError on malformed input.
SourceUnit parse_unit(std::string path, std::string text);

/// One step of the syntactic nesting path from the function body down to a call.
struct PathStep {
    StmtKind kind;
    Span span;
};

struct CallRef {
    std::string callee;
    std::vector<Expr> args;
    std::vector<PathStep> path;
    Span span;
};

/// Every direct call of `fn` in evaluation order (arguments before the call that consumes them).
/// Indirect calls are skipped but their operands are still visited.
std::vector<CallRef> extract_calls(const FunctionAst& fn);

/// Source-like rendering. Parenthesization follows the original source.
std::string print_expr(const Expr& e);
std::string print_stmt(const Stmt& s, int indent = 0);
std::string print_function(const FunctionAst& fn);
std::string print_unit(const SourceUnit& unit);

/// Span-free structural dump, used to compare trees.
std::string dump(const Expr& e);
std::string dump(const Stmt& s);
std::string dump(const FunctionAst& fn);

/// Root variable of an lvalue-like expression: `srp` for `srp->rq->cmd`, `p` for `*p` or `p[i]`.
const Expr* root_ident(const Expr& e);

/// True for plain identifiers and member chains rooted at an identifier.
bool is_access_path(const Expr& e);

/// Replaces the root identifier of `e` with `replacement`.
Expr substitute_root(const Expr& e, const Expr& replacement);

namespace lex {

enum class TokenKind { Ident, Number, String, Char, Punct, End };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t offset;
    int line;
    int column;
};

/// Tokenizes C source; comments and preprocessor lines are skipped.
std::vector<Token> tokenize(std::string_view text);

bool is_keyword(std::string_view word);

}  // namespace lex

/// Validates UTF-8; returns the offset of the first invalid byte.
std::optional<std::size_t> find_invalid_utf8(std::string_view text);

}  // namespace pacvd
