#include <json.hpp>

#include "pacvd/abstraction.hpp"

namespace pacvd {

std::string report_to_json(const AbstractionReport& report) {
    using nlohmann::ordered_json;
    ordered_json facts = ordered_json::array();
    for (const auto& f : report.facts) {
        ordered_json j;
        j["callee"] = f.callee;
        j["api"] = f.api;
        if (f.fuzzy) j["fuzzy"] = std::string(to_string(*f.fuzzy));
        if (f.conditions) {
            ordered_json conds = ordered_json::array();
            for (const auto& c : *f.conditions)
                conds.push_back({{"api", c.api}, {"guards", c.guards}, {"chain", c.chain}});
            j["conditions"] = std::move(conds);
        }
        if (f.count) j["count"] = *f.count;
        if (f.key_variables) j["key_variables"] = *f.key_variables;
        facts.push_back(std::move(j));
    }
    ordered_json doc;
    doc["target"] = report.target;
    doc["level"] = std::string(to_string(report.level));
    doc["depth_limit"] = report.depth_limit;
    doc["overflow_fallback_used"] = report.overflow_fallback_used;
    doc["callees"] = report.callees;
    doc["facts"] = std::move(facts);
    doc["rendered"] = report.rendered;
    return doc.dump(2) + "\n";
}

}  // namespace pacvd
