#include <algorithm>
#include <cctype>
#include <deque>

#include "pacvd/abstraction.hpp"

namespace pacvd {

std::string_view to_string(FuzzyClass c) {
    switch (c) {
        case FuzzyClass::AllBranches: return "all";
        case FuzzyClass::SomeBranches: return "some";
        case FuzzyClass::NoBranch: return "none";
    }
    return "none";
}

std::string_view to_string(AbstractionLevel l) {
    switch (l) {
        case AbstractionLevel::A1: return "A1";
        case AbstractionLevel::A2: return "A2";
        case AbstractionLevel::A3: return "A3";
        case AbstractionLevel::A4: return "A4";
    }
    return "A3";
}

std::optional<AbstractionLevel> parse_level(std::string_view text) {
    if (text.size() == 2 && (text[0] == 'A' || text[0] == 'a')) text.remove_prefix(1);
    if (text.size() == 1 && text[0] >= '1' && text[0] <= '4')
        return static_cast<AbstractionLevel>(text[0] - '0');
    return std::nullopt;
}

// ---- context ----------------------------------------------------------------------------

AnalysisContext::AnalysisContext(std::span<const SourceUnit> units, const ApiCatalog& catalog,
                                 const std::string& target, int depth_limit,
                                 std::size_t path_cap)
    : catalog_(catalog), cg_(build_call_graph(units, target, depth_limit)), path_cap_(path_cap) {
    const FunctionIndex index(units);
    for (const auto& name : cg_.nodes) {
        if (cg_.external.count(name)) continue;
        const FunctionAst* ast = index.find(name);
        if (!ast) continue;
        FunctionData data;
        data.ast = ast;
        data.cfg = build_cfg(*ast);
        data.du = build_def_use(*ast, data.cfg);
        fns_.emplace(name, std::move(data));
    }
    // reaches: least fixpoint over the in-depth edges
    for (const auto& api : catalog_.canonical_order()) {
        auto& set = reach_[api];
        // call sites come from the CFG so code pruned as unreachable never counts
        for (const auto& [name, data] : fns_)
            for (const auto& b : data.cfg.blocks)
                for (const auto& call : b.calls)
                    if (canonical_of(call.callee) == api) set.insert(name);
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& e : cg_.edges)
                if (fns_.count(e.caller) && !set.count(e.caller) && set.count(e.callee)) {
                    set.insert(e.caller);
                    changed = true;
                }
        }
    }
}

std::string AnalysisContext::canonical_of(std::string_view callee) const {
    const ApiEntry* e = catalog_.find(callee);
    return e ? e->canonical_name() : std::string();
}

const FunctionAst* AnalysisContext::function(std::string_view name) const {
    auto it = fns_.find(name);
    return it == fns_.end() ? nullptr : it->second.ast;
}

const Cfg* AnalysisContext::cfg(std::string_view name) const {
    auto it = fns_.find(name);
    return it == fns_.end() ? nullptr : &it->second.cfg;
}

const DefUse* AnalysisContext::def_use(std::string_view name) const {
    auto it = fns_.find(name);
    return it == fns_.end() ? nullptr : &*it->second.du;
}

bool AnalysisContext::reaches(std::string_view fn, std::string_view api) const {
    auto it = reach_.find(api);
    return it != reach_.end() && it->second.count(std::string(fn));
}

bool AnalysisContext::site_hits(std::string_view fn, const CallSite& site,
                                std::string_view api) const {
    if (catalog_.find(site.callee)) return canonical_of(site.callee) == api;
    return fns_.count(site.callee) && cg_.has_edge(fn, site.site) && reaches(site.callee, api);
}

std::vector<std::string> AnalysisContext::present_apis(std::string_view fn) const {
    std::vector<std::string> out;
    for (const auto& api : catalog_.canonical_order())
        if (reaches(fn, api)) out.push_back(api);
    return out;
}

std::vector<std::string> AnalysisContext::direct_callees() const {
    std::vector<std::string> out;
    const FunctionAst* root = function(cg_.root);
    if (!root) return out;
    for (const auto& call : extract_calls(*root)) {
        if (call.callee == cg_.root || catalog_.find(call.callee) || !fns_.count(call.callee))
            continue;
        if (std::find(out.begin(), out.end(), call.callee) == out.end()) out.push_back(call.callee);
    }
    return out;
}

namespace {

std::vector<const CallSite*> sites_in_order(const Cfg& cfg) {
    std::vector<const CallSite*> out;
    for (const auto& b : cfg.blocks)
        for (const auto& c : b.calls) out.push_back(&c);
    std::sort(out.begin(), out.end(),
              [](const CallSite* a, const CallSite* b) { return a->site < b->site; });
    return out;
}

const CallSite* find_site(const Cfg& cfg, std::size_t site) {
    for (const auto& b : cfg.blocks)
        for (const auto& c : b.calls)
            if (c.site == site) return &c;
    return nullptr;
}

/// Strong definitions of `var` reaching the use that contains `at`.
std::vector<std::size_t> strong_reaching(const DefUse& du, const std::string& var, Span at) {
    std::vector<std::size_t> out;
    for (const auto& u : du.uses) {
        if (u.var != var || u.span.begin > at.begin || u.span.end < at.end) continue;
        for (std::size_t d : u.reaching)
            if (du.defs[d].strong) out.push_back(d);
        break;
    }
    return out;
}

Expr strip_parens(Expr e) {
    e.parenthesized = false;
    return e;
}

}  // namespace

FuzzyResult AnalysisContext::classify_fuzzy(std::string_view fn, std::string_view api) const {
    const Cfg* g = cfg(fn);
    if (!g || !reaches(fn, api)) return {FuzzyClass::NoBranch, false};
    std::vector<bool> hit(g->blocks.size(), false);
    bool any = false;
    for (const auto& b : g->blocks)
        for (const auto& c : b.calls)
            if (site_hits(fn, c, api)) any = hit[b.id] = true;
    if (!any) return {FuzzyClass::NoBranch, false};

    const PathSet paths = enumerate_acyclic_paths(*g, path_cap_);
    bool miss = false;
    if (!paths.overflow) {
        for (const auto& p : paths.paths)
            if (std::none_of(p.begin(), p.end(), [&](BlockId b) { return hit[b]; })) {
                miss = true;
                break;
            }
        return {miss ? FuzzyClass::SomeBranches : FuzzyClass::AllBranches, false};
    }
    // exact fallback: is some sink reachable through hit-free blocks only?
    const auto dag = path_dag(*g);
    std::vector<bool> seen(dag.size(), false);
    std::vector<BlockId> stack;
    if (!hit[g->entry]) {
        stack.push_back(g->entry);
        seen[g->entry] = true;
    }
    while (!stack.empty() && !miss) {
        const BlockId b = stack.back();
        stack.pop_back();
        if (dag[b].empty()) miss = true;
        for (BlockId s : dag[b])
            if (!seen[s] && !hit[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
    }
    return {miss ? FuzzyClass::SomeBranches : FuzzyClass::AllBranches, true};
}

void AnalysisContext::chain_dfs(const std::string& fn, std::string_view api, ChainHit& cur,
                                std::vector<ChainHit>& out) const {
    const Cfg* g = cfg(fn);
    if (!g) return;
    for (const CallSite* site : sites_in_order(*g)) {
        if (catalog_.find(site->callee)) {
            if (canonical_of(site->callee) != api) continue;
            ChainHit hit = cur;
            hit.api_site = site->site;
            out.push_back(std::move(hit));
            continue;
        }
        if (!site_hits(fn, *site, api)) continue;
        if (std::find(cur.chain.begin(), cur.chain.end(), site->callee) != cur.chain.end())
            continue;
        cur.sites.push_back(site->site);
        cur.chain.push_back(site->callee);
        chain_dfs(site->callee, api, cur, out);
        cur.chain.pop_back();
        cur.sites.pop_back();
    }
}

std::vector<AnalysisContext::ChainHit> AnalysisContext::chain_hits(std::string_view fn,
                                                                   std::string_view api) const {
    std::vector<ChainHit> out;
    if (!reaches(fn, api)) return out;
    ChainHit cur;
    cur.chain.emplace_back(fn);
    chain_dfs(std::string(fn), api, cur, out);
    return out;
}

std::vector<ConcreteCondition> AnalysisContext::collect_conditions(std::string_view fn,
                                                                   std::string_view api) const {
    std::vector<ConcreteCondition> out;
    for (const auto& hit : chain_hits(fn, api)) {
        const Cfg& g = *cfg(hit.chain.back());
        const auto block = g.block_of_site(hit.api_site);
        if (!block) continue;
        for (const auto& conj : guard_conjunctions(g, *block)) {
            ConcreteCondition c{std::string(api), {}, hit.chain};
            for (const Guard* guard : conj) c.guards.push_back(guard->rendered);
            if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
        }
    }
    return out;
}

std::size_t AnalysisContext::count_calls(std::string_view fn, std::string_view api) const {
    std::set<std::pair<std::string, std::size_t>> sites;
    for (const auto& hit : chain_hits(fn, api)) sites.insert({hit.chain.back(), hit.api_site});
    return sites.size();
}

std::vector<std::string> AnalysisContext::extract_key_variables(std::string_view fn,
                                                                std::string_view api) const {
    std::vector<std::string> out;
    const FunctionAst* root_fn = function(cg_.root);
    for (const auto& hit : chain_hits(fn, api)) {
        const CallSite* site = find_site(*cfg(hit.chain.back()), hit.api_site);
        if (!site || site->args.empty()) continue;
        Expr cur = site->args[0];
        std::size_t frame = hit.chain.size() - 1;
        std::optional<Expr> shown;  // set when the chain resolves into the target's frame
        std::string text;
        while (true) {
            const std::string& fname = hit.chain[frame];
            const FunctionAst* f = function(fname);
            const DefUse* du = def_use(fname);
            const Expr* root = root_ident(cur);
            if (!root || root->kind != ExprKind::Ident) {
                text = print_expr(strip_parens(cur));
                break;
            }
            std::string name = root->text;
            Span at = root->span;
            for (int hops = 0; hops < 16; ++hops) {
                const auto defs = strong_reaching(*du, name, at);
                if (defs.size() != 1 || !du->defs[defs[0]].copy_of) break;
                const Expr* src = root_ident(*du->defs[defs[0]].copy_of);
                if (!src || src->kind != ExprKind::Ident) break;
                name = src->text;
                at = src->span;
            }
            const auto defs = strong_reaching(*du, name, at);
            const auto param = f->param_index(name);
            if (!param || defs.size() != 1 || du->defs[defs[0]].kind != DefKind::Param) {
                text = name;
                break;
            }
            const std::vector<Expr>* actuals = nullptr;
            if (frame == 0) {
                if (root_fn)
                    for (const auto& call : extract_calls(*root_fn))
                        if (call.callee == hit.chain[0]) {
                            if (*param < call.args.size()) shown = call.args[*param];
                            break;
                        }
                if (shown) text = print_expr(strip_parens(*shown));
                else text = name;
                break;
            }
            const CallSite* into = find_site(*cfg(hit.chain[frame - 1]), hit.sites[frame - 1]);
            if (into) actuals = &into->args;
            if (!actuals || *param >= actuals->size()) {
                text = name;
                break;
            }
            cur = (*actuals)[*param];
            --frame;
        }
        if (std::find(out.begin(), out.end(), text) == out.end()) out.push_back(text);
    }
    return out;
}

// ---- facts and rendering ------------------------------------------------------------------

std::vector<ApiUsageFacts> compute_facts(const AnalysisContext& ctx, bool* overflow) {
    std::vector<ApiUsageFacts> out;
    const ApiCatalog& cat = ctx.catalog();
    for (const auto& callee : ctx.direct_callees()) {
        const auto present = ctx.present_apis(callee);
        if (present.empty()) continue;
        std::set<std::string> shown(present.begin(), present.end());
        for (const auto& api : present)
            for (const auto& partner : cat.partners(api)) shown.insert(partner);
        for (const auto& api : cat.canonical_order()) {
            if (!shown.count(api)) continue;
            ApiUsageFacts f;
            f.callee = callee;
            f.api = api;
            const FuzzyResult fz = ctx.classify_fuzzy(callee, api);
            if (overflow && fz.overflow) *overflow = true;
            f.fuzzy = fz.value;
            f.conditions = ctx.collect_conditions(callee, api);
            f.count = ctx.count_calls(callee, api);
            f.key_variables = ctx.extract_key_variables(callee, api);
            out.push_back(std::move(f));
        }
    }
    return out;
}

ApiUsageFacts project(const ApiUsageFacts& facts, AbstractionLevel level) {
    ApiUsageFacts out;
    out.callee = facts.callee;
    out.api = facts.api;
    const int l = static_cast<int>(level);
    if (l == 1) out.fuzzy = facts.fuzzy;
    if (l >= 2) out.conditions = facts.conditions;
    if (l >= 3) out.count = facts.count;
    if (l >= 4) out.key_variables = facts.key_variables;
    return out;
}

std::vector<ApiUsageFacts> project(const std::vector<ApiUsageFacts>& facts,
                                   AbstractionLevel level) {
    std::vector<ApiUsageFacts> out;
    out.reserve(facts.size());
    for (const auto& f : facts) out.push_back(project(f, level));
    return out;
}

namespace {

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string header(const std::string& callee) { return "In the " + quoted(callee) + " function:\n"; }

bool is_identifier(const std::string& s) {
    return !s.empty() && (std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_') &&
           std::all_of(s.begin(), s.end(), [](char c) {
               return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
           });
}

/// Runs of facts sharing a callee, in order.
std::vector<std::pair<std::size_t, std::size_t>> callee_groups(
    const std::vector<ApiUsageFacts>& facts) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < facts.size();) {
        std::size_t j = i;
        while (j < facts.size() && facts[j].callee == facts[i].callee) ++j;
        out.emplace_back(i, j);
        i = j;
    }
    return out;
}

int class_rank(FuzzyClass c) {
    return c == FuzzyClass::AllBranches ? 0 : c == FuzzyClass::SomeBranches ? 1 : 2;
}

std::string fuzzy_section(const std::vector<ApiUsageFacts>& facts) {
    std::string out;
    for (auto [b, e] : callee_groups(facts)) {
        out += header(facts[b].callee);
        std::vector<const ApiUsageFacts*> rows;
        for (std::size_t i = b; i < e; ++i) rows.push_back(&facts[i]);
        std::stable_sort(rows.begin(), rows.end(), [](const auto* x, const auto* y) {
            return class_rank(*x->fuzzy) < class_rank(*y->fuzzy);
        });
        for (const auto* f : rows) {
            const char* phrase = *f->fuzzy == FuzzyClass::AllBranches    ? "On all branches"
                                 : *f->fuzzy == FuzzyClass::SomeBranches ? "On some branches"
                                                                         : "On no branch";
            out += std::string(phrase) + ", the " + quoted(f->api) + " API is called.\n";
        }
    }
    return out;
}

std::string condition_line(const ConcreteCondition& c, bool sentence_start) {
    std::string lead;
    if (c.guards.empty()) {
        lead = "if unconditionally";
    } else {
        lead = "if ";
        for (std::size_t i = 0; i < c.guards.size(); ++i)
            lead += (i ? " and (" : "(") + c.guards[i] + ")";
    }
    if (sentence_start) lead[0] = 'I';
    return lead + ", the " + quoted(c.api) + " API is called.\n";
}

std::string concrete_section(const std::vector<ApiUsageFacts>& facts) {
    std::string out;
    for (auto [b, e] : callee_groups(facts)) {
        const std::string& callee = facts[b].callee;
        std::vector<const ConcreteCondition*> conds;
        for (std::size_t i = b; i < e; ++i)
            for (const auto& c : *facts[i].conditions) conds.push_back(&c);
        std::set<std::pair<std::string, std::string>> narrated;
        const std::vector<std::string>* open_chain = nullptr;
        for (const auto* c : conds) {
            if (open_chain && *open_chain == c->chain) {
                out += condition_line(*c, c->chain.size() == 1);
                continue;
            }
            open_chain = &c->chain;
            if (c->chain.size() == 1) {
                out += header(callee);
                out += condition_line(*c, true);
                continue;
            }
            for (std::size_t i = 0; i + 1 < c->chain.size(); ++i) {
                const std::pair<std::string, std::string> hop{c->chain[i], c->chain[i + 1]};
                if (!narrated.insert(hop).second) continue;
                out += "In the " + quoted(hop.first) + " function, the " + quoted(hop.second) +
                       " function is called.\n";
            }
            out += "In the " + quoted(c->chain.back()) + " function,\n";
            out += condition_line(*c, false);
        }
    }
    return out;
}

std::string counts_section(const std::vector<ApiUsageFacts>& facts) {
    std::string out;
    for (auto [b, e] : callee_groups(facts)) {
        out += header(facts[b].callee);
        for (std::size_t i = b; i < e; ++i)
            out += "the " + quoted(facts[i].api) + " API is called " +
                   std::to_string(*facts[i].count) + " times" + (i + 1 < e ? ",\n" : ".\n");
    }
    return out;
}

std::string key_variable_section(const std::vector<ApiUsageFacts>& facts) {
    std::string out;
    for (auto [b, e] : callee_groups(facts)) {
        std::string lines;
        for (std::size_t i = b; i < e; ++i)
            for (const auto& v : *facts[i].key_variables)
                lines += "the " + quoted(facts[i].api) + " API operates on the " +
                         quoted(is_identifier(v) ? v : "(" + v + ")") + " variable.\n";
        if (!lines.empty()) out += header(facts[b].callee) + lines;
    }
    return out;
}

}  // namespace

std::string render(const std::vector<ApiUsageFacts>& facts, AbstractionLevel level,
                   int depth_limit, bool include_fuzzy_at_a2) {
    if (facts.empty())
        return "No primitive API activity detected within depth " + std::to_string(depth_limit) +
               ".\n";
    const int l = static_cast<int>(level);
    std::vector<std::string> sections;
    if (l == 1 || include_fuzzy_at_a2) sections.push_back(fuzzy_section(facts));
    if (l >= 2) sections.push_back(concrete_section(facts));
    if (l >= 3) sections.push_back(counts_section(facts));
    if (l >= 4) {
        std::string kv = key_variable_section(facts);
        if (!kv.empty()) sections.push_back(std::move(kv));
    }
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) out += (i ? "\n" : "") + sections[i];
    return out;
}

AbstractionReport abstract(const std::string& target, std::span<const SourceUnit> units,
                           const ApiCatalog& catalog, const AbstractionOptions& options) {
    const AnalysisContext ctx(units, catalog, target, options.depth_limit, options.path_cap);
    AbstractionReport r;
    r.target = target;
    r.level = options.level;
    r.depth_limit = options.depth_limit;
    const auto full = compute_facts(ctx, &r.overflow_fallback_used);
    for (const auto& f : full)
        if (r.callees.empty() || r.callees.back() != f.callee) r.callees.push_back(f.callee);
    r.rendered = render(full, options.level, options.depth_limit, options.include_fuzzy_at_a2);
    r.facts = project(full, options.level);
    return r;
}

}  // namespace pacvd
