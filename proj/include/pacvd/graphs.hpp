#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pacvd/frontend.hpp"

namespace pacvd {

using BlockId = std::size_t;

/// Branch condition attached to one outgoing edge of a multi-successor block.
struct Guard {
    Expr expr;
    bool taken = true;
    /// Source spelling of the condition, negated for the not-taken edge.
    std::string rendered;
};

/// A call site inside a block. `site` is the call's index in extract_calls() order.
struct CallSite {
    std::string callee;
    std::vector<Expr> args;
    std::size_t site = 0;
    Span span;
};

struct BasicBlock {
    BlockId id = 0;
    /// Straight-line statements: Decl, ExprStmt, Return, Opaque.
    std::vector<Stmt> stmts;
    /// Branch condition or switch scrutinee evaluated at the end of the block.
    std::optional<Expr> condition;
    std::vector<CallSite> calls;
};

struct CfgEdge {
    BlockId from = 0;
    BlockId to = 0;
    std::optional<Guard> guard;
};

struct Cfg {
    std::string function;
    std::vector<BasicBlock> blocks;
    BlockId entry = 0;
    BlockId exit = 1;
    std::vector<CfgEdge> edges;
    /// Unreachable blocks removed during construction.
    std::size_t pruned_blocks = 0;

    std::vector<const CfgEdge*> out_edges(BlockId b) const;
    std::vector<const CfgEdge*> in_edges(BlockId b) const;
    std::vector<BlockId> successors(BlockId b) const;
    std::vector<BlockId> predecessors(BlockId b) const;
    /// Block containing the call with extract_calls() index `site`.
    std::optional<BlockId> block_of_site(std::size_t site) const;
};

/// Lowers structured statements: if -> diamond, loops -> guarded header with back edge,
/// switch -> fan-out with per-case guards and fallthrough. Deterministic block numbering;
/// entry is block 0 and exit is block 1.
Cfg build_cfg(const FunctionAst& fn);

/// Successor lists of the path DAG: every back edge u->h is replaced by edges u->x for each
/// successor x of h outside h's natural loop, so a loop contributes its zero- and
/// one-iteration shapes.
std::vector<std::vector<BlockId>> path_dag(const Cfg& cfg);

struct PathSet {
    std::vector<std::vector<BlockId>> paths;
    bool overflow = false;
};

/// Entry-to-sink paths of path_dag() in DFS order, truncated at `cap` with `overflow` set.
PathSet enumerate_acyclic_paths(const Cfg& cfg, std::size_t cap = 4096);

/// Guard conjunctions controlling `block` (control-dependence ancestry, outermost first).
/// Unconditional blocks yield a single empty conjunction.
std::vector<std::vector<const Guard*>> guard_conjunctions(const Cfg& cfg, BlockId block,
                                                          std::size_t cap = 16);

/// Text export: `node <id>` lines then `edge <from> <to> [guard]` lines.
std::string export_cfg(const Cfg& cfg);

// ---- call graph ------------------------------------------------------------------

struct CallEdge {
    std::string caller;
    std::string callee;
    std::size_t site = 0;

    friend bool operator==(const CallEdge&, const CallEdge&) = default;
    friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

struct CallGraph {
    std::string root;
    int depth_limit = 3;
    /// Breadth-first discovery order.
    std::vector<std::string> nodes;
    std::vector<CallEdge> edges;
    std::map<std::string, int> depth;
    /// Callees without an available definition.
    std::set<std::string> external;

    bool contains(std::string_view name) const;
    bool has_edge(std::string_view caller, std::size_t site) const;
    std::vector<const CallEdge*> edges_from(std::string_view caller) const;
};

/// Index of function definitions over a set of units.
class FunctionIndex {
  public:
    explicit FunctionIndex(std::span<const SourceUnit> units);

    const FunctionAst* find(std::string_view name) const;
    std::size_t definitions(std::string_view name) const;

  private:
    std::map<std::string, std::vector<const FunctionAst*>, std::less<>> defs_;
};

/// Breadth-first expansion from `root` up to `depth_limit` call layers. Nodes at the limit are
/// kept but not expanded; undefined callees become external leaves.
/// Throws RootNotFound, AmbiguousRoot, or std::invalid_argument for depth_limit < 1.
CallGraph build_call_graph(std::span<const SourceUnit> units, const std::string& root,
                           int depth_limit = 3);

std::string export_call_graph(const CallGraph& cg);

// ---- def-use -----------------------------------------------------------------------

enum class DefKind { Param, Decl, Assign, MemberAssign, Update };

struct DefSite {
    std::string var;
    DefKind kind = DefKind::Decl;
    Span span;
    /// Parameter position for DefKind::Param.
    std::size_t param = 0;
    /// Right-hand side when the definition copies an access path (`q = p`, `q = s->rq`).
    std::optional<Expr> copy_of;
    /// Strong definitions overwrite the variable; member stores do not.
    bool strong = true;
};

struct UseSite {
    std::string var;
    Span span;
    /// Text of the maximal access path rooted at the variable, e.g. `srp->rq->cmd`.
    std::string text;
    /// Indices into DefUse::defs reaching this use.
    std::vector<std::size_t> reaching;
};

struct DefUse {
    std::string function;
    std::vector<DefSite> defs;
    std::vector<UseSite> uses;
    /// Parameters and locals.
    std::set<std::string> declared;
    /// (source variable, destination variable) for simple copies between declared variables.
    std::set<std::pair<std::string, std::string>> copy_edges;

    /// Def-use chains: variable -> (def index, use indices reached by it).
    std::map<std::string, std::vector<std::pair<std::size_t, std::vector<std::size_t>>>>
    chains() const;
    const UseSite* use_at(std::string_view var, Span span) const;
};

/// Reaching-definitions analysis over the function's CFG.
DefUse build_def_use(const FunctionAst& fn);
DefUse build_def_use(const FunctionAst& fn, const Cfg& cfg);

}  // namespace pacvd
