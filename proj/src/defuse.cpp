#include <algorithm>

#include "pacvd/graphs.hpp"

namespace pacvd {

std::map<std::string, std::vector<std::pair<std::size_t, std::vector<std::size_t>>>>
DefUse::chains() const {
    std::map<std::string, std::vector<std::pair<std::size_t, std::vector<std::size_t>>>> out;
    for (std::size_t d = 0; d < defs.size(); ++d) {
        std::vector<std::size_t> reached;
        for (std::size_t u = 0; u < uses.size(); ++u)
            if (std::find(uses[u].reaching.begin(), uses[u].reaching.end(), d) !=
                uses[u].reaching.end())
                reached.push_back(u);
        out[defs[d].var].emplace_back(d, std::move(reached));
    }
    return out;
}

const UseSite* DefUse::use_at(std::string_view var, Span span) const {
    for (const auto& u : uses)
        if (u.var == var && u.span == span) return &u;
    return nullptr;
}

namespace {

using DefSet = std::vector<bool>;

class Analyzer {
  public:
    Analyzer(const FunctionAst& fn, const Cfg& cfg) : fn_(fn), cfg_(cfg) {
        du_.function = fn.name;
        for (const auto& p : fn.params)
            if (!p.name.empty()) du_.declared.insert(p.name);
    }

    DefUse run() {
        // pass 1 discovers every definition; pass 2 resolves reaching sets
        for (std::size_t i = 0; i < fn_.params.size(); ++i) {
            if (fn_.params[i].name.empty()) continue;
            DefSite d;
            d.var = fn_.params[i].name;
            d.kind = DefKind::Param;
            d.span = fn_.span;
            d.param = i;
            du_.defs.push_back(std::move(d));
        }
        param_defs_ = du_.defs.size();
        collecting_ = true;
        for (const auto& b : cfg_.blocks) walk_block(b, nullptr);
        collecting_ = false;

        const std::size_t n = cfg_.blocks.size();
        const std::size_t m = du_.defs.size();
        std::vector<DefSet> in(n, DefSet(m, false)), out(n, DefSet(m, false));
        DefSet entry_out(m, false);
        for (std::size_t i = 0; i < param_defs_; ++i) entry_out[i] = true;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& b : cfg_.blocks) {
                DefSet cur(m, false);
                for (BlockId p : cfg_.predecessors(b.id))
                    for (std::size_t k = 0; k < m; ++k) cur[k] = cur[k] || out[p][k];
                if (b.id == cfg_.entry)
                    for (std::size_t k = 0; k < m; ++k) cur[k] = cur[k] || entry_out[k];
                in[b.id] = cur;
                walk_block(b, &cur);
                if (cur != out[b.id]) {
                    out[b.id] = std::move(cur);
                    changed = true;
                }
            }
        }
        du_.uses.clear();
        def_cursor_ = param_defs_;
        recording_ = true;
        for (const auto& b : cfg_.blocks) {
            DefSet cur = in[b.id];
            walk_block(b, &cur);
        }
        std::sort(du_.uses.begin(), du_.uses.end(), [](const UseSite& a, const UseSite& b) {
            return a.span.begin != b.span.begin ? a.span.begin < b.span.begin
                                                : a.span.end < b.span.end;
        });
        return std::move(du_);
    }

  private:
    const FunctionAst& fn_;
    const Cfg& cfg_;
    DefUse du_;
    std::size_t param_defs_ = 0;
    bool collecting_ = false;
    bool recording_ = false;
    std::size_t def_cursor_ = 0;
    DefSet* live_ = nullptr;

    /// Index of the definition created at `span` for `var`; registered on the first pass.
    std::size_t def_index(const std::string& var, DefKind kind, Span span,
                          std::optional<Expr> copy_of, bool strong) {
        if (collecting_) {
            DefSite d;
            d.var = var;
            d.kind = kind;
            d.span = span;
            d.copy_of = copy_of;
            d.strong = strong;
            if (strong && copy_of) {
                if (const Expr* src = root_ident(*copy_of);
                    src && src->kind == ExprKind::Ident && du_.declared.count(src->text) &&
                    du_.declared.count(var))
                    du_.copy_edges.insert({src->text, var});
            }
            du_.defs.push_back(std::move(d));
            return du_.defs.size() - 1;
        }
        for (std::size_t i = param_defs_; i < du_.defs.size(); ++i)
            if (du_.defs[i].var == var && du_.defs[i].span == span) return i;
        return du_.defs.size();
    }

    void apply_def(const std::string& var, DefKind kind, Span span, std::optional<Expr> copy_of,
                   bool strong) {
        const std::size_t idx = def_index(var, kind, span, std::move(copy_of), strong);
        if (!live_ || idx >= du_.defs.size()) return;
        if (strong)
            for (std::size_t k = 0; k < du_.defs.size(); ++k)
                if (du_.defs[k].var == var) (*live_)[k] = false;
        (*live_)[idx] = true;
    }

    void use(const Expr& path) {
        if (!recording_ || !live_) return;
        const Expr* root = root_ident(path);
        if (!root || root->kind != ExprKind::Ident) return;
        UseSite u;
        u.var = root->text;
        u.span = path.span;
        u.text = print_expr(path);
        for (std::size_t k = 0; k < du_.defs.size(); ++k)
            if ((*live_)[k] && du_.defs[k].var == u.var) u.reaching.push_back(k);
        du_.uses.push_back(std::move(u));
    }

    static bool is_member_chain(const Expr& e) {
        if (e.kind == ExprKind::Ident) return true;
        return e.kind == ExprKind::Member && is_member_chain(e.operands[0]);
    }

    void visit(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Ident:
                use(e);
                return;
            case ExprKind::Member:
                if (is_member_chain(e)) {
                    use(e);
                    return;
                }
                break;
            case ExprKind::Assign: {
                const Expr& lhs = e.operands[0];
                const Expr& rhs = e.operands[1];
                visit(rhs);
                if (lhs.kind == ExprKind::Ident) {
                    if (e.text != "=") use(lhs);
                    std::optional<Expr> copy;
                    if (e.text == "=" && is_access_path(rhs)) copy = rhs;
                    apply_def(lhs.text, DefKind::Assign, e.span, std::move(copy), true);
                } else {
                    visit(lhs);
                    if (const Expr* root = root_ident(lhs); root && root->kind == ExprKind::Ident)
                        apply_def(root->text, DefKind::MemberAssign, e.span, std::nullopt, false);
                }
                return;
            }
            case ExprKind::Unary:
                if ((e.text == "++" || e.text == "--") && e.operands[0].kind == ExprKind::Ident) {
                    use(e.operands[0]);
                    apply_def(e.operands[0].text, DefKind::Update, e.span, std::nullopt, true);
                    return;
                }
                break;
            default:
                break;
        }
        for (const auto& o : e.operands) visit(o);
    }

    void visit_stmt(const Stmt& s) {
        if (s.kind == StmtKind::Decl) {
            if (s.value) visit(*s.value);
            if (s.name.empty()) return;
            du_.declared.insert(s.name);
            std::optional<Expr> copy;
            if (s.value && is_access_path(*s.value)) copy = *s.value;
            apply_def(s.name, DefKind::Decl, s.span, std::move(copy), true);
            return;
        }
        if (s.value) visit(*s.value);
    }

    void walk_block(const BasicBlock& b, DefSet* live) {
        live_ = live;
        for (const auto& s : b.stmts) visit_stmt(s);
        if (b.condition) visit(*b.condition);
        live_ = nullptr;
    }
};

}  // namespace

DefUse build_def_use(const FunctionAst& fn, const Cfg& cfg) { return Analyzer(fn, cfg).run(); }

DefUse build_def_use(const FunctionAst& fn) { return build_def_use(fn, build_cfg(fn)); }

}  // namespace pacvd
