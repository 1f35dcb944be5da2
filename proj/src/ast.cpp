#include <sstream>

#include "pacvd/frontend.hpp"

namespace pacvd {

Expr Expr::ident(std::string name, Span span) {
    Expr e;
    e.kind = ExprKind::Ident;
    e.text = std::move(name);
    e.span = span;
    return e;
}

Expr Expr::binary(std::string op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.text = std::move(op);
    e.span = {lhs.span.begin, rhs.span.end};
    e.operands.push_back(std::move(lhs));
    e.operands.push_back(std::move(rhs));
    return e;
}

Expr Expr::unary(std::string op, Expr operand) {
    Expr e;
    e.kind = ExprKind::Unary;
    e.text = std::move(op);
    e.span = operand.span;
    e.operands.push_back(std::move(operand));
    return e;
}

std::optional<std::size_t> FunctionAst::param_index(std::string_view n) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == n) return i;
    return std::nullopt;
}

const FunctionAst* SourceUnit::find(std::string_view name) const {
    for (const auto& f : functions)
        if (f.name == name) return &f;
    return nullptr;
}

// ---- printing -------------------------------------------------------------

namespace {

std::string print_bare(const Expr& e) {
    const auto& ops = e.operands;
    switch (e.kind) {
        case ExprKind::Ident:
        case ExprKind::Literal:
            return e.text;
        case ExprKind::Member:
            return print_expr(ops[0]) + (e.arrow ? "->" : ".") + e.text;
        case ExprKind::Call:
        case ExprKind::IndirectCall: {
            std::string out;
            std::size_t first = 0;
            if (e.kind == ExprKind::Call) {
                out = e.text;
            } else {
                out = print_expr(ops[0]);
                first = 1;
            }
            out += "(";
            for (std::size_t i = first; i < ops.size(); ++i) {
                if (i > first) out += ", ";
                out += print_expr(ops[i]);
            }
            return out + ")";
        }
        case ExprKind::Unary:
            if (e.postfix) return print_expr(ops[0]) + e.text;
            if (e.text == "sizeof") return "sizeof " + print_expr(ops[0]);
            // keep `- -x` and `& &x` from fusing into `--x` / `&&x`
            if (!ops[0].parenthesized && ops[0].kind == ExprKind::Unary && !ops[0].postfix &&
                (ops[0].text[0] == e.text[0]))
                return e.text + " " + print_expr(ops[0]);
            return e.text + print_expr(ops[0]);
        case ExprKind::Binary:
            if (e.text == ",") return print_expr(ops[0]) + ", " + print_expr(ops[1]);
            return print_expr(ops[0]) + " " + e.text + " " + print_expr(ops[1]);
        case ExprKind::Assign:
            return print_expr(ops[0]) + " " + e.text + " " + print_expr(ops[1]);
        case ExprKind::Index:
            return print_expr(ops[0]) + "[" + print_expr(ops[1]) + "]";
        case ExprKind::Conditional:
            return print_expr(ops[0]) + " ? " + print_expr(ops[1]) + " : " + print_expr(ops[2]);
        case ExprKind::Cast:
            return "(" + e.type_text + ")" + print_expr(ops[0]);
        case ExprKind::SizeofType:
            return "sizeof(" + e.type_text + ")";
        case ExprKind::InitList: {
            std::string out = "{";
            for (std::size_t i = 0; i < ops.size(); ++i) {
                if (i) out += ", ";
                out += print_expr(ops[i]);
            }
            return out + "}";
        }
    }
    return {};
}

void indent_to(std::ostringstream& os, int n) {
    for (int i = 0; i < n; ++i) os << "    ";
}

void print_into(std::ostringstream& os, const Stmt& s, int indent);

void print_block_inline(std::ostringstream& os, const Stmt& s, int indent) {
    os << "{\n";
    for (const auto& c : s.body) print_into(os, c, indent + 1);
    indent_to(os, indent);
    os << "}";
}

// Returns true when the output already ends with a newline (unbraced sub-statement).
bool print_body(std::ostringstream& os, const Stmt& s, int indent) {
    if (s.kind == StmtKind::Block) {
        print_block_inline(os, s, indent);
        return false;
    }
    os << "\n";
    print_into(os, s, indent + 1);
    return true;
}

void finish_line(std::ostringstream& os, bool ended) {
    if (!ended) os << "\n";
}

void print_into(std::ostringstream& os, const Stmt& s, int indent) {
    auto line = [&] { indent_to(os, indent); };
    switch (s.kind) {
        case StmtKind::Block:
            line();
            print_block_inline(os, s, indent);
            os << "\n";
            return;
        case StmtKind::If:
            line();
            os << "if (" << print_expr(*s.cond) << ") ";
            if (s.body.size() > 1) {
                if (print_body(os, s.body[0], indent)) {
                    line();
                    os << "else ";
                } else {
                    os << " else ";
                }
                finish_line(os, print_body(os, s.body[1], indent));
            } else {
                finish_line(os, print_body(os, s.body[0], indent));
            }
            return;
        case StmtKind::While:
            line();
            os << "while (" << print_expr(*s.cond) << ") ";
            finish_line(os, print_body(os, s.body[0], indent));
            return;
        case StmtKind::DoWhile:
            line();
            os << "do ";
            if (print_body(os, s.body[0], indent)) line();
            else os << " ";
            os << "while (" << print_expr(*s.cond) << ");\n";
            return;
        case StmtKind::For: {
            line();
            os << "for (";
            if (s.init.empty()) {
                os << ";";
            } else if (s.init.front().kind == StmtKind::Decl) {
                os << s.init.front().type_text.substr(
                          0, s.init.front().type_text.find_first_of("*["))
                   << " ";
                // declarators share one base type
                for (std::size_t i = 0; i < s.init.size(); ++i) {
                    const auto& d = s.init[i];
                    if (i) os << ", ";
                    const auto star = d.type_text.find('*');
                    if (star != std::string::npos) {
                        const auto dims = d.type_text.find('[');
                        os << d.type_text.substr(star, dims == std::string::npos
                                                           ? std::string::npos
                                                           : dims - star);
                    }
                    os << d.name;
                    const auto dims = d.type_text.find('[');
                    if (dims != std::string::npos) os << d.type_text.substr(dims);
                    if (d.value) os << " = " << print_expr(*d.value);
                }
                os << ";";
            } else {
                os << print_expr(*s.init.front().value) << ";";
            }
            if (s.cond) os << " " << print_expr(*s.cond);
            os << ";";
            if (s.value) os << " " << print_expr(*s.value);
            os << ") ";
            finish_line(os, print_body(os, s.body[0], indent));
            return;
        }
        case StmtKind::Switch:
            line();
            os << "switch (" << print_expr(*s.cond) << ") {\n";
            for (const auto& c : s.cases) {
                indent_to(os, indent + 1);
                if (c.label) os << "case " << print_expr(*c.label) << ":\n";
                else os << "default:\n";
                for (const auto& b : c.body) print_into(os, b, indent + 2);
            }
            line();
            os << "}\n";
            return;
        case StmtKind::Return:
            line();
            os << "return";
            if (s.value) os << " " << print_expr(*s.value);
            os << ";\n";
            return;
        case StmtKind::ExprStmt:
            line();
            os << print_expr(*s.value) << ";\n";
            return;
        case StmtKind::Decl: {
            line();
            const auto star = s.type_text.find_first_of("*[");
            const auto dims = s.type_text.find('[');
            if (star == std::string::npos) {
                os << s.type_text << " " << s.name;
            } else {
                std::string base = s.type_text.substr(0, star);
                while (!base.empty() && base.back() == ' ') base.pop_back();
                os << base << " ";
                if (s.type_text[star] == '*')
                    os << s.type_text.substr(
                        star, dims == std::string::npos ? std::string::npos : dims - star);
                os << s.name;
                if (dims != std::string::npos) os << s.type_text.substr(dims);
            }
            if (s.value) os << " = " << print_expr(*s.value);
            os << ";\n";
            return;
        }
        case StmtKind::Break:
            line();
            os << "break;\n";
            return;
        case StmtKind::Continue:
            line();
            os << "continue;\n";
            return;
        case StmtKind::Opaque:
            line();
            os << s.text << "\n";
            return;
    }
}

}  // namespace

std::string print_expr(const Expr& e) {
    std::string bare = print_bare(e);
    return e.parenthesized ? "(" + bare + ")" : bare;
}

std::string print_stmt(const Stmt& s, int indent) {
    std::ostringstream os;
    print_into(os, s, indent);
    return os.str();
}

std::string print_function(const FunctionAst& fn) {
    std::ostringstream os;
    os << fn.return_type << (fn.return_type.empty() ? "" : " ") << fn.name << "(";
    if (fn.params.empty()) os << "void";
    for (std::size_t i = 0; i < fn.params.size(); ++i) {
        if (i) os << ", ";
        const auto& p = fn.params[i];
        // array dimensions are folded into the type text after the name
        const auto dims = p.type_text.find('[');
        if (p.name.empty()) os << p.type_text;
        else if (dims == std::string::npos) os << p.type_text << " " << p.name;
        else os << p.type_text.substr(0, dims) << " " << p.name << p.type_text.substr(dims);
    }
    os << ") ";
    print_block_inline(os, fn.body, 0);
    os << "\n";
    return os.str();
}

std::string print_unit(const SourceUnit& unit) {
    std::string out;
    for (const auto& fn : unit.functions) {
        if (!out.empty()) out += "\n";
        out += print_function(fn);
    }
    return out;
}

// ---- structural dump ----------------------------------------------------------

namespace {

const char* kind_name(ExprKind k) {
    switch (k) {
        case ExprKind::Ident: return "ident";
        case ExprKind::Member: return "member";
        case ExprKind::Call: return "call";
        case ExprKind::IndirectCall: return "icall";
        case ExprKind::Unary: return "unary";
        case ExprKind::Binary: return "binary";
        case ExprKind::Assign: return "assign";
        case ExprKind::Literal: return "lit";
        case ExprKind::Index: return "index";
        case ExprKind::Conditional: return "cond";
        case ExprKind::Cast: return "cast";
        case ExprKind::SizeofType: return "sizeof-type";
        case ExprKind::InitList: return "init";
    }
    return "?";
}

const char* kind_name(StmtKind k) {
    switch (k) {
        case StmtKind::Block: return "block";
        case StmtKind::If: return "if";
        case StmtKind::While: return "while";
        case StmtKind::DoWhile: return "do";
        case StmtKind::For: return "for";
        case StmtKind::Switch: return "switch";
        case StmtKind::Return: return "return";
        case StmtKind::ExprStmt: return "expr";
        case StmtKind::Decl: return "decl";
        case StmtKind::Break: return "break";
        case StmtKind::Continue: return "continue";
        case StmtKind::Opaque: return "opaque";
    }
    return "?";
}

}  // namespace

std::string dump(const Expr& e) {
    std::string out = "(";
    out += kind_name(e.kind);
    if (!e.text.empty()) out += " '" + e.text + "'";
    if (!e.type_text.empty()) out += " <" + e.type_text + ">";
    if (e.arrow) out += " ->";
    if (e.postfix) out += " post";
    if (e.parenthesized) out += " paren";
    for (const auto& o : e.operands) out += " " + dump(o);
    return out + ")";
}

std::string dump(const Stmt& s) {
    std::string out = "(";
    out += kind_name(s.kind);
    if (!s.name.empty()) out += " " + s.name;
    if (!s.type_text.empty()) out += " <" + s.type_text + ">";
    if (!s.text.empty()) out += " '" + s.text + "'";
    if (!s.init.empty()) {
        out += " init[";
        for (const auto& i : s.init) out += dump(i);
        out += "]";
    }
    if (s.cond) out += " cond=" + dump(*s.cond);
    if (s.value) out += " value=" + dump(*s.value);
    for (const auto& b : s.body) out += " " + dump(b);
    for (const auto& c : s.cases) {
        out += " [case " + (c.label ? dump(*c.label) : std::string("default"));
        for (const auto& b : c.body) out += " " + dump(b);
        out += "]";
    }
    return out + ")";
}

std::string dump(const FunctionAst& fn) {
    std::string out = "(function " + fn.name + " <" + fn.return_type + ">";
    for (const auto& p : fn.params) out += " (param " + p.name + " <" + p.type_text + ">)";
    return out + " " + dump(fn.body) + ")";
}

// ---- call extraction ----------------------------------------------------------

namespace {

struct CallCollector {
    std::vector<CallRef>& out;
    std::vector<PathStep> path;

    void expr(const Expr& e) {
        for (const auto& o : e.operands) expr(o);
        if (e.kind == ExprKind::Call) out.push_back({e.text, e.operands, path, e.span});
    }

    void stmt(const Stmt& s) {
        path.push_back({s.kind, s.span});
        for (const auto& i : s.init) stmt(i);
        switch (s.kind) {
            case StmtKind::DoWhile:
                for (const auto& b : s.body) stmt(b);
                if (s.cond) expr(*s.cond);
                break;
            case StmtKind::For:
                if (s.cond) expr(*s.cond);
                if (s.value) expr(*s.value);
                for (const auto& b : s.body) stmt(b);
                break;
            default:
                if (s.cond) expr(*s.cond);
                if (s.value) expr(*s.value);
                for (const auto& b : s.body) stmt(b);
                for (const auto& c : s.cases)
                    for (const auto& b : c.body) stmt(b);
                break;
        }
        path.pop_back();
    }
};

}  // namespace

std::vector<CallRef> extract_calls(const FunctionAst& fn) {
    std::vector<CallRef> out;
    CallCollector collector{out, {}};
    collector.stmt(fn.body);
    return out;
}

// ---- access paths ---------------------------------------------------------------

const Expr* root_ident(const Expr& e) {
    const Expr* cur = &e;
    while (true) {
        switch (cur->kind) {
            case ExprKind::Ident:
                return cur;
            case ExprKind::Member:
            case ExprKind::Index:
            case ExprKind::Cast:
                cur = &cur->operands[0];
                break;
            case ExprKind::Unary:
                if (cur->text == "*" || cur->text == "&" || cur->text == "++" ||
                    cur->text == "--") {
                    cur = &cur->operands[0];
                    break;
                }
                return nullptr;
            case ExprKind::Binary:
                // pointer arithmetic: `p + 1`
                if ((cur->text == "+" || cur->text == "-") &&
                    cur->operands[1].kind == ExprKind::Literal) {
                    cur = &cur->operands[0];
                    break;
                }
                return nullptr;
            default:
                return nullptr;
        }
    }
}

bool is_access_path(const Expr& e) {
    if (e.kind == ExprKind::Ident) return true;
    if (e.kind == ExprKind::Member) return is_access_path(e.operands[0]);
    return false;
}

Expr substitute_root(const Expr& e, const Expr& replacement) {
    if (e.kind == ExprKind::Ident) {
        Expr r = replacement;
        r.parenthesized = r.parenthesized || e.parenthesized;
        return r;
    }
    if (e.operands.empty()) return e;
    Expr copy = e;
    copy.operands[0] = substitute_root(e.operands[0], replacement);
    // a compound replacement under a member access or unary operator needs grouping
    auto& inner = copy.operands[0];
    if (e.operands[0].kind == ExprKind::Ident && !inner.parenthesized &&
        (inner.kind == ExprKind::Binary || inner.kind == ExprKind::Assign ||
         inner.kind == ExprKind::Conditional || inner.kind == ExprKind::Cast ||
         (inner.kind == ExprKind::Unary && !inner.postfix && e.kind != ExprKind::Unary)))
        inner.parenthesized = true;
    return copy;
}

}  // namespace pacvd
