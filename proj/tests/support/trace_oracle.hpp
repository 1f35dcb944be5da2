#pragma once

// Brute-force reference for all/some/none classification. Works on the AST directly and never
// touches the CFG code: every execution that runs each loop body zero or one time is traced,
// recording whether it evaluated a matching call.

#include <functional>
#include <set>
#include <string>
#include <utility>

#include "pacvd/frontend.hpp"

namespace testoracle {

enum class Exit { Normal, Break, Continue, Return };

using Outcome = std::pair<bool, Exit>;
using Outcomes = std::set<Outcome>;
using Matcher = std::function<bool(const std::string&)>;

inline bool calls_match(const pacvd::Expr& e, const Matcher& m) {
    if (e.kind == pacvd::ExprKind::Call && m(e.text)) return true;
    for (const auto& o : e.operands)
        if (calls_match(o, m)) return true;
    return false;
}

class Tracer {
  public:
    explicit Tracer(Matcher m) : m_(std::move(m)) {}

    Outcomes eval(const std::optional<pacvd::Expr>& e, const Outcomes& in) const {
        if (!e || !calls_match(*e, m_)) return in;
        Outcomes out;
        for (const auto& [hit, ex] : in) out.insert({true, ex});
        return out;
    }

    /// Runs `s` on the Normal states of `in`; other states pass through untouched.
    Outcomes run(const pacvd::Stmt& s, const Outcomes& in) const {
        Outcomes live, out;
        for (const auto& o : in) (o.second == Exit::Normal ? live : out).insert(o);
        if (live.empty()) return out;
        for (const auto& o : step(s, live)) out.insert(o);
        return out;
    }

    Outcomes run_function(const pacvd::FunctionAst& fn) const {
        return run(fn.body, {{false, Exit::Normal}});
    }

  private:
    Matcher m_;

    static Outcomes with_exit(const Outcomes& in, Exit from, Exit to) {
        Outcomes out;
        for (const auto& [hit, ex] : in) out.insert({hit, ex == from ? to : ex});
        return out;
    }

    static Outcomes select(const Outcomes& in, std::initializer_list<Exit> kinds) {
        Outcomes out;
        for (const auto& o : in)
            for (Exit k : kinds)
                if (o.second == k) out.insert({o.first, Exit::Normal});
        return out;
    }

    static void merge(Outcomes& into, const Outcomes& from) { into.insert(from.begin(), from.end()); }

    Outcomes step(const pacvd::Stmt& s, const Outcomes& in) const {
        using pacvd::StmtKind;
        switch (s.kind) {
            case StmtKind::Block: {
                Outcomes cur = in;
                for (const auto& c : s.body) cur = run(c, cur);
                return cur;
            }
            case StmtKind::ExprStmt:
            case StmtKind::Decl:
                return eval(s.value, in);
            case StmtKind::Opaque:
                return in;
            case StmtKind::Return:
                return with_exit(eval(s.value, in), Exit::Normal, Exit::Return);
            case StmtKind::Break:
                return with_exit(in, Exit::Normal, Exit::Break);
            case StmtKind::Continue:
                return with_exit(in, Exit::Normal, Exit::Continue);
            case StmtKind::If: {
                const Outcomes c = eval(s.cond, in);
                Outcomes out = run(s.body[0], c);
                merge(out, s.body.size() > 1 ? run(s.body[1], c) : c);
                return out;
            }
            case StmtKind::While: {
                const Outcomes c = eval(s.cond, in);
                Outcomes out = c;
                const Outcomes b = run(s.body[0], c);
                merge(out, eval(s.cond, select(b, {Exit::Normal, Exit::Continue})));
                merge(out, select(b, {Exit::Break}));
                merge(out, keep(b, Exit::Return));
                return out;
            }
            case StmtKind::DoWhile: {
                const Outcomes b = run(s.body[0], in);
                Outcomes out = eval(s.cond, select(b, {Exit::Normal, Exit::Continue}));
                merge(out, select(b, {Exit::Break}));
                merge(out, keep(b, Exit::Return));
                return out;
            }
            case StmtKind::For: {
                Outcomes cur = in;
                for (const auto& i : s.init) cur = run(i, cur);
                const Outcomes c = eval(s.cond, cur);
                Outcomes out = s.cond ? c : Outcomes{};
                const Outcomes b = run(s.body[0], c);
                merge(out, eval(s.cond, eval(s.value, select(b, {Exit::Normal, Exit::Continue}))));
                merge(out, select(b, {Exit::Break}));
                merge(out, keep(b, Exit::Return));
                return out;
            }
            case StmtKind::Switch: {
                const Outcomes c = eval(s.cond, in);
                Outcomes out;
                bool has_default = false;
                for (std::size_t i = 0; i < s.cases.size(); ++i) {
                    if (!s.cases[i].label) has_default = true;
                    Outcomes cur = c;
                    for (std::size_t k = i; k < s.cases.size(); ++k)
                        for (const auto& st : s.cases[k].body) cur = run(st, cur);
                    merge(out, select(cur, {Exit::Normal, Exit::Break}));
                    merge(out, keep(cur, Exit::Continue));
                    merge(out, keep(cur, Exit::Return));
                }
                if (!has_default) merge(out, c);
                return out;
            }
        }
        return in;
    }

    static Outcomes keep(const Outcomes& in, Exit k) {
        Outcomes out;
        for (const auto& o : in)
            if (o.second == k) out.insert(o);
        return out;
    }
};

enum class Coverage { All, Some, None };

/// Classifies a function by whether its 0/1-iteration executions evaluate a matching call.
inline Coverage trace_classify(const pacvd::FunctionAst& fn, const Matcher& m) {
    const Outcomes end = Tracer(m).run_function(fn);
    bool any_hit = false, any_miss = false;
    for (const auto& [hit, ex] : end) (hit ? any_hit : any_miss) = true;
    if (any_hit && !any_miss) return Coverage::All;
    return any_hit ? Coverage::Some : Coverage::None;
}

}  // namespace testoracle
