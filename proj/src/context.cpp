#include <algorithm>
#include <numeric>

#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"
#include "rng.hpp"

namespace pacvd {

namespace {

struct KindName {
    ContextKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ContextKind::None, "none"},           {ContextKind::AllCallees, "all-callees"},
    {ContextKind::ApiGuided, "api-guided"}, {ContextKind::Similarity, "similarity"},
    {ContextKind::Random, "random"},       {ContextKind::Hierarchy, "hierarchy"},
};

// Callees within the depth bound, depth first then name.
std::vector<const CalleeRecord*> in_depth(const SampleRecord& s, int limit) {
    std::vector<const CalleeRecord*> out;
    for (const auto& c : s.callees)
        if (c.depth <= limit) out.push_back(&c);
    std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
        return a->depth != b->depth ? a->depth < b->depth : a->name < b->name;
    });
    return out;
}

void sort_by_depth(std::vector<const CalleeRecord*>& v) {
    std::sort(v.begin(), v.end(), [](const auto* a, const auto* b) {
        return a->depth != b->depth ? a->depth < b->depth : a->name < b->name;
    });
}

std::string trim_trailing(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r')) s.pop_back();
    return s;
}

ContextResult code_context(const std::vector<const CalleeRecord*>& picked, bool flagged) {
    ContextResult r;
    r.flagged = flagged;
    for (const auto* c : picked) {
        if (!r.text.empty()) r.text += "\n";
        r.text += "// callee: " + c->name + " (depth " + std::to_string(c->depth) + ")\n" +
                  trim_trailing(c->code) + "\n";
        r.selected.push_back(c->name);
    }
    return r;
}

ContextResult abstraction_context(const SampleRecord& s, AbstractionLevel level,
                                  const ApiCatalog& catalog, const ContextOptions& o) {
    ContextResult r;
    if (s.degraded) {
        r.flagged = true;
        return r;
    }
    try {
        std::vector<SourceUnit> units;
        units.push_back(parse_unit(s.target_name + ".c", s.target_code));
        for (const auto& c : s.callees) {
            if (c.name == s.target_name) continue;
            try {
                units.push_back(parse_unit(c.name + ".c", c.code));
            } catch (const Error&) {
                r.flagged = true;
            }
        }
        AbstractionOptions ao;
        ao.level = level;
        ao.depth_limit = o.depth_limit;
        ao.include_fuzzy_at_a2 = o.include_fuzzy_at_a2;
        const auto report = abstract(s.target_name, units, catalog, ao);
        r.text = report.rendered;
        r.selected = report.callees;
    } catch (const Error&) {
        r.text.clear();
        r.flagged = true;
    }
    return r;
}

// Callees whose own body or in-depth callees call a catalog API.
ContextResult api_guided(const SampleRecord& s, const ApiCatalog& catalog, int limit) {
    const auto eligible = in_depth(s, limit);
    std::map<std::string, std::set<std::string>> calls;
    for (const auto* c : eligible) calls[c->name] = call_names(c->code);
    std::vector<const CalleeRecord*> picked;
    for (const auto* c : eligible) {
        std::set<std::string> seen{c->name};
        std::vector<std::string> stack{c->name};
        bool hit = false;
        while (!stack.empty() && !hit) {
            const std::string cur = stack.back();
            stack.pop_back();
            for (const auto& callee : calls[cur]) {
                if (match_call(catalog, callee)) {
                    hit = true;
                    break;
                }
                if (calls.count(callee) && seen.insert(callee).second) stack.push_back(callee);
            }
        }
        if (hit) picked.push_back(c);
    }
    return code_context(picked, false);
}

ContextResult similarity_context(const SampleRecord& s, const ContextOptions& o) {
    const auto eligible = in_depth(s, o.depth_limit);
    std::vector<std::string> codes;
    for (const auto* c : eligible) codes.push_back(c->code);
    const auto comps = similarity_components(s.target_code, codes);
    std::vector<std::size_t> order(eligible.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores;
    for (const auto& c : comps) scores.push_back(c.combined(o.similarity_weights));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return eligible[a]->name < eligible[b]->name;
    });
    std::vector<const CalleeRecord*> picked;
    for (std::size_t i = 0; i < order.size() && i < o.sample_size; ++i)
        picked.push_back(eligible[order[i]]);
    return code_context(picked, eligible.size() < o.sample_size);
}

ContextResult random_context(const SampleRecord& s, std::uint64_t seed, const ContextOptions& o) {
    auto pool = in_depth(s, o.depth_limit);
    const bool flagged = pool.size() < o.sample_size;
    std::mt19937_64 rng(seed);
    detail::sample_prefix(pool, o.sample_size, rng);
    sort_by_depth(pool);
    return code_context(pool, flagged);
}

// Round-robin over depths 1..limit, one seeded pick per visit, until the quota is met.
ContextResult hierarchy_context(const SampleRecord& s, std::uint64_t seed, const ContextOptions& o) {
    const auto eligible = in_depth(s, o.depth_limit);
    std::map<int, std::vector<const CalleeRecord*>> buckets;
    for (const auto* c : eligible) buckets[c->depth].push_back(c);
    std::mt19937_64 rng(seed);
    std::vector<const CalleeRecord*> picked;
    bool progress = true;
    while (picked.size() < o.sample_size && progress) {
        progress = false;
        for (auto& [depth, bucket] : buckets) {
            if (picked.size() >= o.sample_size) break;
            if (bucket.empty()) continue;
            const auto j = static_cast<std::size_t>(detail::uniform_below(rng, bucket.size()));
            picked.push_back(bucket[j]);
            bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(j));
            progress = true;
        }
    }
    sort_by_depth(picked);
    return code_context(picked, eligible.size() < o.sample_size);
}

}  // namespace

std::string to_string(const ContextStrategy& s) {
    if (s.kind == ContextKind::Abstraction) return std::string(to_string(s.level));
    for (const auto& k : kKindNames)
        if (k.kind == s.kind) return std::string(k.name);
    return "?";
}

std::optional<ContextStrategy> parse_context_strategy(std::string_view text) {
    if (const auto level = parse_level(text)) return ContextStrategy{ContextKind::Abstraction, *level};
    for (const auto& k : kKindNames)
        if (k.name == text) return ContextStrategy{k.kind, AbstractionLevel::A3};
    return std::nullopt;
}

ContextResult build_context(const SampleRecord& sample, const ContextStrategy& strategy,
                            const ApiCatalog& catalog, std::uint64_t seed,
                            const ContextOptions& options) {
    switch (strategy.kind) {
        case ContextKind::None: return {};
        case ContextKind::Abstraction:
            return abstraction_context(sample, strategy.level, catalog, options);
        case ContextKind::AllCallees:
            return code_context(in_depth(sample, options.depth_limit), false);
        case ContextKind::ApiGuided: return api_guided(sample, catalog, options.depth_limit);
        case ContextKind::Similarity: return similarity_context(sample, options);
        case ContextKind::Random: return random_context(sample, seed, options);
        case ContextKind::Hierarchy: return hierarchy_context(sample, seed, options);
    }
    return {};
}

}  // namespace pacvd
