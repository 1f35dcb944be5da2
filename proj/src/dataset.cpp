#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"

namespace pacvd {

namespace {

using nlohmann::json;

bool parse_sample_label(const json& v, std::size_t line) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) {
        const auto n = v.get<long>();
        if (n == 0 || n == 1) return n == 1;
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "vulnerable" || s == "yes") return true;
        if (s == "safe" || s == "no") return false;
    }
    throw SchemaError(line, "label must be \"vulnerable\" or \"safe\"");
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

bool target_parses(const SampleRecord& s) {
    try {
        return parse_unit(s.target_name + ".c", s.target_code).find(s.target_name) != nullptr;
    } catch (const Error&) {
        return false;
    }
}

SampleRecord parse_record(const json& j, std::size_t line) {
    if (!j.is_object()) throw SchemaError(line, "expected a JSON object");
    for (const char* key : {"id", "target_name", "target_code", "label"})
        if (!j.contains(key)) throw SchemaError(line, std::string("missing field \"") + key + "\"");
    SampleRecord s;
    s.id = j.at("id").get<std::string>();
    if (s.id.empty()) throw SchemaError(line, "empty id");
    s.cve = optional_string(j, "cve");
    s.cwe = optional_string(j, "cwe");
    s.project = j.value("project", std::string());
    s.commit = j.value("commit", std::string());
    s.target_name = j.at("target_name").get<std::string>();
    s.target_code = j.at("target_code").get<std::string>();
    s.vulnerable = parse_sample_label(j.at("label"), line);
    std::set<std::string> names;
    if (j.contains("callees")) {
        for (const auto& c : j.at("callees")) {
            CalleeRecord r;
            r.name = c.at("name").get<std::string>();
            r.code = c.at("code").get<std::string>();
            r.depth = c.at("depth").get<int>();
            if (r.depth < 1) throw SchemaError(line, "callee " + r.name + " has depth < 1");
            if (!names.insert(r.name).second)
                throw SchemaError(line, "callee " + r.name + " listed twice");
            s.callees.push_back(std::move(r));
        }
    }
    s.degraded = !target_parses(s);
    return s;
}

}  // namespace

std::vector<SampleRecord> parse_dataset(std::string_view text) {
    std::vector<SampleRecord> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(line_no, std::string("invalid JSON: ") + e.what());
        }
        SampleRecord s;
        try {
            s = parse_record(j, line_no);
        } catch (const json::exception& e) {
            throw SchemaError(line_no, e.what());
        }
        if (!ids.insert(s.id).second) throw DuplicateEntry(line_no, s.id);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SampleRecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(0, "cannot read dataset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str());
}

std::string sample_to_json(const SampleRecord& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    if (s.cve) j["cve"] = *s.cve;
    if (s.cwe) j["cwe"] = *s.cwe;
    j["project"] = s.project;
    j["commit"] = s.commit;
    j["target_name"] = s.target_name;
    j["target_code"] = s.target_code;
    nlohmann::ordered_json callees = nlohmann::ordered_json::array();
    for (const auto& c : s.callees)
        callees.push_back({{"name", c.name}, {"code", c.code}, {"depth", c.depth}});
    j["callees"] = std::move(callees);
    j["label"] = s.vulnerable ? "vulnerable" : "safe";
    return j.dump();
}

}  // namespace pacvd
