#include <algorithm>
#include <map>
#include <sstream>

#include "pacvd/graphs.hpp"

namespace pacvd {

std::vector<const CfgEdge*> Cfg::out_edges(BlockId b) const {
    std::vector<const CfgEdge*> out;
    for (const auto& e : edges)
        if (e.from == b) out.push_back(&e);
    return out;
}

std::vector<const CfgEdge*> Cfg::in_edges(BlockId b) const {
    std::vector<const CfgEdge*> out;
    for (const auto& e : edges)
        if (e.to == b) out.push_back(&e);
    return out;
}

std::vector<BlockId> Cfg::successors(BlockId b) const {
    std::vector<BlockId> out;
    for (const auto& e : edges)
        if (e.from == b) out.push_back(e.to);
    return out;
}

std::vector<BlockId> Cfg::predecessors(BlockId b) const {
    std::vector<BlockId> out;
    for (const auto& e : edges)
        if (e.to == b) out.push_back(e.from);
    return out;
}

std::optional<BlockId> Cfg::block_of_site(std::size_t site) const {
    for (const auto& b : blocks)
        for (const auto& c : b.calls)
            if (c.site == site) return b.id;
    return std::nullopt;
}

namespace {

Expr without_parens(const Expr& e) {
    Expr copy = e;
    copy.parenthesized = false;
    return copy;
}

std::string render_taken(const Expr& e) { return print_expr(without_parens(e)); }

std::string render_negated(const Expr& e) {
    if (e.kind == ExprKind::Unary && e.text == "!" && !e.postfix)
        return render_taken(e.operands[0]);
    const std::string text = render_taken(e);
    if (e.kind == ExprKind::Ident || e.kind == ExprKind::Member ||
        e.kind == ExprKind::Call || e.kind == ExprKind::Index || e.kind == ExprKind::Literal)
        return "!" + text;
    return "!(" + text + ")";
}

Guard make_guard(const Expr& cond, bool taken) {
    return Guard{without_parens(cond), taken, taken ? render_taken(cond) : render_negated(cond)};
}

class CfgBuilder {
  public:
    explicit CfgBuilder(const FunctionAst& fn) {
        cfg_.function = fn.name;
        const auto calls = extract_calls(fn);
        for (std::size_t i = 0; i < calls.size(); ++i)
            site_by_span_[{calls[i].span.begin, calls[i].span.end}] = i;
        cfg_.entry = new_block();
        cfg_.exit = new_block();
        cur_ = new_block();
        edge(cfg_.entry, cur_);
        lower(fn.body);
        edge(cur_, cfg_.exit);
        prune();
    }

    Cfg take() { return std::move(cfg_); }

  private:
    struct Jumps {
        BlockId brk;
        std::optional<BlockId> cont;
    };

    Cfg cfg_;
    BlockId cur_ = 0;
    std::vector<Jumps> jumps_;
    // loop heads that must stay distinct from any nested loop header
    std::vector<bool> sealed_;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> site_by_span_;

    BlockId new_block() {
        BasicBlock b;
        b.id = cfg_.blocks.size();
        cfg_.blocks.push_back(std::move(b));
        sealed_.push_back(false);
        return cfg_.blocks.back().id;
    }

    void edge(BlockId from, BlockId to, std::optional<Guard> guard = std::nullopt) {
        cfg_.edges.push_back({from, to, std::move(guard)});
    }

    void collect_calls(BlockId b, const Expr& e) {
        for (const auto& o : e.operands) collect_calls(b, o);
        if (e.kind != ExprKind::Call) return;
        auto it = site_by_span_.find({e.span.begin, e.span.end});
        cfg_.blocks[b].calls.push_back(
            {e.text, e.operands, it == site_by_span_.end() ? 0 : it->second, e.span});
    }

    void append(const Stmt& s) {
        cfg_.blocks[cur_].stmts.push_back(s);
        if (s.value) collect_calls(cur_, *s.value);
    }

    void set_condition(BlockId b, const Expr& cond) {
        cfg_.blocks[b].condition = cond;
        collect_calls(b, cond);
    }

    bool is_blank(BlockId b) const {
        const auto& blk = cfg_.blocks[b];
        return b != cfg_.entry && !sealed_[b] && blk.stmts.empty() && !blk.condition && blk.calls.empty();
    }

    BlockId fresh_or_current() {
        if (is_blank(cur_)) return cur_;
        const BlockId b = new_block();
        edge(cur_, b);
        return b;
    }

    std::optional<BlockId> continue_target() const {
        for (auto it = jumps_.rbegin(); it != jumps_.rend(); ++it)
            if (it->cont) return it->cont;
        return std::nullopt;
    }

    void lower(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Block:
                for (const auto& c : s.body) lower(c);
                return;
            case StmtKind::ExprStmt:
            case StmtKind::Decl:
            case StmtKind::Opaque:
                append(s);
                return;
            case StmtKind::Return:
                append(s);
                edge(cur_, cfg_.exit);
                cur_ = new_block();
                return;
            case StmtKind::Break:
                if (!jumps_.empty()) {
                    edge(cur_, jumps_.back().brk);
                    cur_ = new_block();
                }
                return;
            case StmtKind::Continue:
                if (auto target = continue_target()) {
                    edge(cur_, *target);
                    cur_ = new_block();
                }
                return;
            case StmtKind::If:
                lower_if(s);
                return;
            case StmtKind::While:
                lower_while(s);
                return;
            case StmtKind::DoWhile:
                lower_do(s);
                return;
            case StmtKind::For:
                lower_for(s);
                return;
            case StmtKind::Switch:
                lower_switch(s);
                return;
        }
    }

    void lower_if(const Stmt& s) {
        const BlockId cond = cur_;
        set_condition(cond, *s.cond);
        const BlockId then_b = new_block();
        edge(cond, then_b, make_guard(*s.cond, true));
        cur_ = then_b;
        lower(s.body[0]);
        const BlockId then_end = cur_;
        std::optional<BlockId> else_end;
        if (s.body.size() > 1) {
            const BlockId else_b = new_block();
            edge(cond, else_b, make_guard(*s.cond, false));
            cur_ = else_b;
            lower(s.body[1]);
            else_end = cur_;
        }
        const BlockId join = new_block();
        edge(then_end, join);
        if (else_end) edge(*else_end, join);
        else edge(cond, join, make_guard(*s.cond, false));
        cur_ = join;
    }

    void lower_while(const Stmt& s) {
        const BlockId header = fresh_or_current();
        set_condition(header, *s.cond);
        const BlockId body = new_block();
        const BlockId after = new_block();
        edge(header, body, make_guard(*s.cond, true));
        edge(header, after, make_guard(*s.cond, false));
        jumps_.push_back({after, header});
        cur_ = body;
        lower(s.body[0]);
        edge(cur_, header);
        jumps_.pop_back();
        cur_ = after;
    }

    void lower_do(const Stmt& s) {
        const BlockId head = fresh_or_current();
        sealed_[head] = true;
        const BlockId cond = new_block();
        const BlockId after = new_block();
        jumps_.push_back({after, cond});
        cur_ = head;
        lower(s.body[0]);
        edge(cur_, cond);
        jumps_.pop_back();
        set_condition(cond, *s.cond);
        edge(cond, head, make_guard(*s.cond, true));
        edge(cond, after, make_guard(*s.cond, false));
        cur_ = after;
    }

    void lower_for(const Stmt& s) {
        for (const auto& i : s.init) append(i);
        const BlockId header = fresh_or_current();
        sealed_[header] = true;
        const BlockId body = new_block();
        const BlockId after = new_block();
        if (s.cond) {
            set_condition(header, *s.cond);
            edge(header, body, make_guard(*s.cond, true));
            edge(header, after, make_guard(*s.cond, false));
        } else {
            edge(header, body);
        }
        const BlockId latch = new_block();
        jumps_.push_back({after, latch});
        cur_ = body;
        lower(s.body[0]);
        edge(cur_, latch);
        jumps_.pop_back();
        if (s.value) {
            Stmt step;
            step.kind = StmtKind::ExprStmt;
            step.span = s.value->span;
            step.value = *s.value;
            cur_ = latch;
            append(step);
        }
        edge(latch, header);
        cur_ = after;
    }

    void lower_switch(const Stmt& s) {
        const BlockId dispatch = cur_;
        set_condition(dispatch, *s.cond);
        const Expr scrutinee = without_parens(*s.cond);
        std::vector<BlockId> arms;
        for (std::size_t i = 0; i < s.cases.size(); ++i) arms.push_back(new_block());
        const BlockId after = new_block();

        std::optional<Expr> any_label;
        std::optional<BlockId> default_arm;
        for (std::size_t i = 0; i < s.cases.size(); ++i) {
            const auto& c = s.cases[i];
            if (!c.label) {
                default_arm = arms[i];
                continue;
            }
            Expr eq = Expr::binary("==", scrutinee, without_parens(*c.label));
            edge(dispatch, arms[i], make_guard(eq, true));
            any_label = any_label ? Expr::binary("||", std::move(*any_label), std::move(eq))
                                  : std::move(eq);
        }
        const BlockId fallback = default_arm.value_or(after);
        if (any_label) edge(dispatch, fallback, make_guard(*any_label, false));
        else edge(dispatch, fallback);

        jumps_.push_back({after, std::nullopt});
        for (std::size_t i = 0; i < s.cases.size(); ++i) {
            cur_ = arms[i];
            for (const auto& b : s.cases[i].body) lower(b);
            edge(cur_, i + 1 < arms.size() ? arms[i + 1] : after);
        }
        jumps_.pop_back();
        cur_ = after;
    }

    void prune() {
        const std::size_t n = cfg_.blocks.size();
        std::vector<bool> seen(n, false);
        std::vector<BlockId> stack{cfg_.entry};
        seen[cfg_.entry] = true;
        while (!stack.empty()) {
            const BlockId b = stack.back();
            stack.pop_back();
            for (const auto& e : cfg_.edges)
                if (e.from == b && !seen[e.to]) {
                    seen[e.to] = true;
                    stack.push_back(e.to);
                }
        }
        seen[cfg_.exit] = true;
        std::vector<BlockId> remap(n, 0);
        std::vector<BasicBlock> kept;
        for (BlockId b = 0; b < n; ++b) {
            if (!seen[b]) continue;
            remap[b] = kept.size();
            kept.push_back(std::move(cfg_.blocks[b]));
            kept.back().id = remap[b];
        }
        std::vector<CfgEdge> edges;
        for (auto& e : cfg_.edges) {
            if (!seen[e.from]) continue;
            e.from = remap[e.from];
            e.to = remap[e.to];
            edges.push_back(std::move(e));
        }
        cfg_.pruned_blocks = n - kept.size();
        cfg_.blocks = std::move(kept);
        cfg_.edges = std::move(edges);
        cfg_.entry = remap[cfg_.entry];
        cfg_.exit = remap[cfg_.exit];
    }
};

using BitRows = std::vector<std::vector<bool>>;

/// Iterative dominator sets; `preds` define the flow direction and `roots` start with only
/// themselves.
BitRows dominator_sets(std::size_t n, const std::vector<std::vector<BlockId>>& preds,
                       const std::vector<bool>& is_root) {
    BitRows dom(n, std::vector<bool>(n, true));
    for (std::size_t b = 0; b < n; ++b)
        if (is_root[b]) {
            dom[b].assign(n, false);
            dom[b][b] = true;
        }
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t b = 0; b < n; ++b) {
            if (is_root[b]) continue;
            std::vector<bool> next(n, true);
            bool any = false;
            for (BlockId p : preds[b]) {
                any = true;
                for (std::size_t k = 0; k < n; ++k) next[k] = next[k] && dom[p][k];
            }
            if (!any) next.assign(n, false);
            next[b] = true;
            if (next != dom[b]) {
                dom[b] = std::move(next);
                changed = true;
            }
        }
    }
    return dom;
}

}  // namespace

Cfg build_cfg(const FunctionAst& fn) { return CfgBuilder(fn).take(); }

std::vector<std::vector<BlockId>> path_dag(const Cfg& cfg) {
    const std::size_t n = cfg.blocks.size();
    std::vector<std::vector<BlockId>> succ(n), preds(n);
    for (const auto& e : cfg.edges) {
        succ[e.from].push_back(e.to);
        preds[e.to].push_back(e.from);
    }
    std::vector<bool> roots(n, false);
    roots[cfg.entry] = true;
    const auto dom = dominator_sets(n, preds, roots);

    // natural loops, merged per header
    std::map<BlockId, std::vector<bool>> loops;
    for (const auto& e : cfg.edges) {
        if (!dom[e.from][e.to]) continue;
        auto& body = loops.try_emplace(e.to, std::vector<bool>(n, false)).first->second;
        body[e.to] = true;
        std::vector<BlockId> stack;
        if (!body[e.from]) {
            body[e.from] = true;
            stack.push_back(e.from);
        }
        while (!stack.empty()) {
            const BlockId b = stack.back();
            stack.pop_back();
            for (BlockId p : preds[b])
                if (!body[p]) {
                    body[p] = true;
                    stack.push_back(p);
                }
        }
    }

    std::vector<std::vector<BlockId>> dag(n);
    for (const auto& e : cfg.edges) {
        auto& out = dag[e.from];
        auto push = [&](BlockId t) {
            if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
        };
        if (dom[e.from][e.to]) {
            const auto& body = loops.at(e.to);
            for (BlockId x : succ[e.to])
                if (!body[x]) push(x);
        } else {
            push(e.to);
        }
    }
    return dag;
}

PathSet enumerate_acyclic_paths(const Cfg& cfg, std::size_t cap) {
    PathSet result;
    const auto dag = path_dag(cfg);
    std::vector<bool> on_path(dag.size(), false);
    std::vector<BlockId> path{cfg.entry};
    std::vector<std::size_t> next{0};
    on_path[cfg.entry] = true;
    while (!path.empty()) {
        const BlockId b = path.back();
        if (dag[b].empty()) {
            if (result.paths.size() == cap) {
                result.overflow = true;
                return result;
            }
            result.paths.push_back(path);
        }
        std::size_t& i = next.back();
        while (i < dag[b].size() && on_path[dag[b][i]]) ++i;
        if (i < dag[b].size()) {
            const BlockId s = dag[b][i++];
            on_path[s] = true;
            path.push_back(s);
            next.push_back(0);
        } else {
            on_path[b] = false;
            path.pop_back();
            next.pop_back();
        }
    }
    return result;
}

std::vector<std::vector<const Guard*>> guard_conjunctions(const Cfg& cfg, BlockId block,
                                                          std::size_t cap) {
    // post-dominators, with every sink (exit or dead end) acting as a root
    const std::size_t n = cfg.blocks.size();
    std::vector<std::vector<BlockId>> succ(n);
    for (const auto& e : cfg.edges) succ[e.from].push_back(e.to);
    std::vector<bool> sinks(n, false);
    for (std::size_t b = 0; b < n; ++b) sinks[b] = succ[b].empty();
    const auto pdom = dominator_sets(n, succ, sinks);

    struct Walker {
        const Cfg& cfg;
        const BitRows& pdom;
        std::size_t cap;
        std::vector<bool> visiting;

        std::vector<std::vector<const Guard*>> conj(BlockId b) {
            std::vector<const CfgEdge*> deps;
            for (const auto& e : cfg.edges) {
                if (!e.guard || e.from == b || visiting[e.from]) continue;
                if (pdom[e.to][b] && !pdom[e.from][b]) deps.push_back(&e);
            }
            if (deps.empty()) return {{}};
            visiting[b] = true;
            std::vector<std::vector<const Guard*>> out;
            for (const CfgEdge* e : deps) {
                for (auto c : conj(e->from)) {
                    c.push_back(&*e->guard);
                    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
                    if (out.size() >= cap) break;
                }
                if (out.size() >= cap) break;
            }
            visiting[b] = false;
            return out;
        }
    };
    Walker w{cfg, pdom, cap, std::vector<bool>(n, false)};
    return w.conj(block);
}

std::string export_cfg(const Cfg& cfg) {
    std::ostringstream os;
    os << "# cfg " << cfg.function << " entry " << cfg.entry << " exit " << cfg.exit << "\n";
    for (const auto& b : cfg.blocks) os << "node " << b.id << "\n";
    for (const auto& e : cfg.edges) {
        os << "edge " << e.from << " " << e.to;
        if (e.guard) os << " " << e.guard->rendered;
        os << "\n";
    }
    return os.str();
}

}  // namespace pacvd
