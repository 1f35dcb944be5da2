#include <deque>
#include <sstream>
#include <stdexcept>

#include "pacvd/errors.hpp"
#include "pacvd/graphs.hpp"

namespace pacvd {

bool CallGraph::contains(std::string_view name) const {
    return depth.find(std::string(name)) != depth.end();
}

bool CallGraph::has_edge(std::string_view caller, std::size_t site) const {
    for (const auto& e : edges)
        if (e.caller == caller && e.site == site) return true;
    return false;
}

std::vector<const CallEdge*> CallGraph::edges_from(std::string_view caller) const {
    std::vector<const CallEdge*> out;
    for (const auto& e : edges)
        if (e.caller == caller) out.push_back(&e);
    return out;
}

FunctionIndex::FunctionIndex(std::span<const SourceUnit> units) {
    for (const auto& u : units)
        for (const auto& f : u.functions) defs_[f.name].push_back(&f);
}

const FunctionAst* FunctionIndex::find(std::string_view name) const {
    auto it = defs_.find(name);
    return it == defs_.end() || it->second.empty() ? nullptr : it->second.front();
}

std::size_t FunctionIndex::definitions(std::string_view name) const {
    auto it = defs_.find(name);
    return it == defs_.end() ? 0 : it->second.size();
}

CallGraph build_call_graph(std::span<const SourceUnit> units, const std::string& root,
                           int depth_limit) {
    if (depth_limit < 1) throw std::invalid_argument("depth limit must be at least 1");
    const FunctionIndex index(units);
    const std::size_t count = index.definitions(root);
    if (count == 0) throw RootNotFound(root);
    if (count > 1) throw AmbiguousRoot(root, count);

    CallGraph cg;
    cg.root = root;
    cg.depth_limit = depth_limit;
    cg.nodes.push_back(root);
    cg.depth[root] = 0;
    std::deque<std::string> queue{root};
    while (!queue.empty()) {
        const std::string name = queue.front();
        queue.pop_front();
        const int d = cg.depth[name];
        const FunctionAst* fn = index.find(name);
        if (!fn || d >= depth_limit) continue;
        const auto calls = extract_calls(*fn);
        for (std::size_t i = 0; i < calls.size(); ++i) {
            const std::string& callee = calls[i].callee;
            cg.edges.push_back({name, callee, i});
            if (cg.depth.count(callee)) continue;
            cg.depth[callee] = d + 1;
            cg.nodes.push_back(callee);
            if (index.find(callee)) queue.push_back(callee);
            else cg.external.insert(callee);
        }
    }
    return cg;
}

std::string export_call_graph(const CallGraph& cg) {
    std::ostringstream os;
    os << "# callgraph " << cg.root << " depth " << cg.depth_limit << "\n";
    for (const auto& n : cg.nodes) {
        os << "node " << n << " " << cg.depth.at(n);
        if (cg.external.count(n)) os << " external";
        os << "\n";
    }
    for (const auto& e : cg.edges)
        os << "edge " << e.caller << " " << e.callee << " " << e.site << "\n";
    return os.str();
}

}  // namespace pacvd
