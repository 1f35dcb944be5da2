#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pacvd/catalog.hpp"
#include "pacvd/frontend.hpp"
#include "pacvd/graphs.hpp"

namespace pacvd {

enum class FuzzyClass { AllBranches, SomeBranches, NoBranch };
enum class AbstractionLevel { A1 = 1, A2 = 2, A3 = 3, A4 = 4 };

std::string_view to_string(FuzzyClass c);
std::string_view to_string(AbstractionLevel l);
/// Accepts "A1".."A4" (case-insensitive) and "1".."4".
std::optional<AbstractionLevel> parse_level(std::string_view text);

struct ConcreteCondition {
    /// Canonical API name.
    std::string api;
    /// Rendered guards, outermost first; empty means unconditional.
    std::vector<std::string> guards;
    /// Analyzed callee first, frame containing the API call last.
    std::vector<std::string> chain;

    friend bool operator==(const ConcreteCondition&, const ConcreteCondition&) = default;
};

/// Facts for one (callee, canonical API). Fields outside the report level stay empty.
struct ApiUsageFacts {
    std::string callee;
    std::string api;
    std::optional<FuzzyClass> fuzzy;
    std::optional<std::vector<ConcreteCondition>> conditions;
    std::optional<std::size_t> count;
    std::optional<std::vector<std::string>> key_variables;

    friend bool operator==(const ApiUsageFacts&, const ApiUsageFacts&) = default;
};

struct FuzzyResult {
    FuzzyClass value = FuzzyClass::NoBranch;
    /// Path enumeration hit the cap and exact reachability decided instead.
    bool overflow = false;
};

/// Shared analysis state for one target: call graph, CFGs and def-use of every member function.
/// Holds pointers into `units`, which must outlive the context.
class AnalysisContext {
  public:
    AnalysisContext(std::span<const SourceUnit> units, const ApiCatalog& catalog,
                    const std::string& target, int depth_limit = 3,
                    std::size_t path_cap = 4096);

    const CallGraph& call_graph() const { return cg_; }
    const ApiCatalog& catalog() const { return catalog_; }
    int depth_limit() const { return cg_.depth_limit; }
    std::size_t path_cap() const { return path_cap_; }

    /// Definition of a call-graph member, or null for externals and non-members.
    const FunctionAst* function(std::string_view name) const;
    const Cfg* cfg(std::string_view name) const;
    const DefUse* def_use(std::string_view name) const;

    /// True when `fn` calls `api` (canonical) directly, or through in-depth call-graph edges.
    bool reaches(std::string_view fn, std::string_view api) const;
    /// Whether call site `site` of `fn` leads to `api`.
    bool site_hits(std::string_view fn, const CallSite& site, std::string_view api) const;
    /// Canonical APIs reached by `fn`, in catalog order.
    std::vector<std::string> present_apis(std::string_view fn) const;
    /// Defined, non-API direct callees of the target in first-call order.
    std::vector<std::string> direct_callees() const;

    FuzzyResult classify_fuzzy(std::string_view fn, std::string_view api) const;
    std::vector<ConcreteCondition> collect_conditions(std::string_view fn,
                                                      std::string_view api) const;
    std::size_t count_calls(std::string_view fn, std::string_view api) const;
    std::vector<std::string> extract_key_variables(std::string_view fn,
                                                   std::string_view api) const;

    /// One in-depth chain from `fn` down to a primitive call site.
    struct ChainHit {
        std::vector<std::string> chain;
        /// sites[i] is the call site in chain[i] that enters chain[i + 1].
        std::vector<std::size_t> sites;
        /// Call-site index of the API call in chain.back().
        std::size_t api_site = 0;
    };
    /// Every simple chain from `fn` to a call of `api`, depth-first in call-site order.
    std::vector<ChainHit> chain_hits(std::string_view fn, std::string_view api) const;

  private:
    struct FunctionData {
        const FunctionAst* ast = nullptr;
        Cfg cfg;
        std::optional<DefUse> du;
    };

    ApiCatalog catalog_;
    CallGraph cg_;
    std::size_t path_cap_;
    std::map<std::string, FunctionData, std::less<>> fns_;
    /// canonical api -> member functions reaching it
    std::map<std::string, std::set<std::string>, std::less<>> reach_;

    std::string canonical_of(std::string_view callee) const;
    void chain_dfs(const std::string& fn, std::string_view api, ChainHit& cur,
                   std::vector<ChainHit>& out) const;
};

struct AbstractionOptions {
    AbstractionLevel level = AbstractionLevel::A3;
    int depth_limit = 3;
    /// Prepend the fuzzy section at A2 and above.
    bool include_fuzzy_at_a2 = false;
    std::size_t path_cap = 4096;
};

struct AbstractionReport {
    std::string target;
    AbstractionLevel level = AbstractionLevel::A3;
    int depth_limit = 3;
    /// Rendered callees in order; facts are grouped by callee in the same order.
    std::vector<std::string> callees;
    std::vector<ApiUsageFacts> facts;
    std::string rendered;
    bool overflow_fallback_used = false;
};

/// Full facts (every field populated) for the rendered callees of the context's target.
std::vector<ApiUsageFacts> compute_facts(const AnalysisContext& ctx, bool* overflow = nullptr);

/// Keeps only the fields selected by `level`.
ApiUsageFacts project(const ApiUsageFacts& facts, AbstractionLevel level);
std::vector<ApiUsageFacts> project(const std::vector<ApiUsageFacts>& facts, AbstractionLevel level);

/// Renders full facts in the gray-box text style for `level`.
std::string render(const std::vector<ApiUsageFacts>& facts, AbstractionLevel level,
                   int depth_limit, bool include_fuzzy_at_a2 = false);

AbstractionReport abstract(const std::string& target, std::span<const SourceUnit> units,
                           const ApiCatalog& catalog, const AbstractionOptions& options);

/// Structured export: {"target","level","depth_limit","overflow_fallback_used","callees",
/// "facts":[{"callee","api","fuzzy"?,"conditions"?,"count"?,"key_variables"?}], "rendered"}.
std::string report_to_json(const AbstractionReport& report);

}  // namespace pacvd
