#include "pacvd/prompt.hpp"

#include <json.hpp>

#include <algorithm>

#include "pacvd/digest.hpp"
#include "pacvd/errors.hpp"
#include "rng.hpp"

namespace pacvd {

namespace {

constexpr std::string_view kRole =
    "You are an expert vulnerability detection system. Provide precise and direct answers with "
    "explanations only when necessary.";

constexpr std::string_view kVerdictInstruction =
    "Provide a detailed response on the vulnerability status of the code. If the code is "
    "vulnerable, start your answer with \"yes\" and provide a brief explanation. If not, start "
    "with \"no\" and explain why.";

// Each template has an API and a no-API form; the latter drops every API sentence.
struct Template {
    std::string_view with_api;
    std::string_view without_api;
};

const Template kBasic{
    "Analyze the following code snippet and associated API information.\n\n[CODE]\n\n[API]\n\n"
    "[INSTRUCTION]",
    "Analyze the following code snippet.\n\n[CODE]\n\n[INSTRUCTION]"};

const Template kChain1{
    "[CODE]\n\n[API]\n\nBased on the above code and API information, please provide a detailed "
    "summary of the code's functionality, analyze the code structure, and locate all positions "
    "where pointers are constructed and dereferenced.",
    "[CODE]\n\nBased on the above code, please provide a detailed summary of the code's "
    "functionality, analyze the code structure, and locate all positions where pointers are "
    "constructed and dereferenced."};

constexpr std::string_view kChain2 =
    "Based on your previous analysis: [Code Analysis], determine whether the code contains "
    "significant vulnerabilities. Answer 'yes' or 'no' and provide reasons if vulnerabilities "
    "are identified.";

const Template kContext1{
    "As a code reviewer, evaluate this code snippet for clarity, functionality, and "
    "maintainability. Consider also the associated API information to ensure that the control "
    "flow aligns with the intended use and structure of the code.\n\n[CODE]\n\n[API]",
    "As a code reviewer, evaluate this code snippet for clarity, functionality, and "
    "maintainability.\n\n[CODE]"};

const Template kContext2{
    "Based on your initial observations and the API information, make a final assessment of "
    "whether the code meets the standards for clarity, functionality, and maintainability. "
    "Respond with 'yes' if improvements are needed, or 'no' if it meets the criteria.",
    "Based on your initial observations, make a final assessment of whether the code meets the "
    "standards for clarity, functionality, and maintainability. Respond with 'yes' if "
    "improvements are needed, or 'no' if it meets the criteria."};

const Template kFewShot{
    "[EXAMPLES]\n\nRefer to the examples above, then analyze the following code snippet and "
    "associated API information.\n\n[CODE]\n\n[API]\n\n[INSTRUCTION]",
    "[EXAMPLES]\n\nRefer to the examples above, then analyze the following code snippet.\n\n"
    "[CODE]\n\n[INSTRUCTION]"};

const Template kContrastive{
    "Examine the 'Before Fix' and 'After Fix' code snippets to understand the vulnerability "
    "remediation. Determine if the 'Before Fix' version is vulnerable, and if so, explain how the "
    "'After Fix' version addresses the issue.\n\n[PAIRS]\n\nRefer to these examples. Now, analyze "
    "the following code snippet and API Information.\n\n[CODE]\n\n[API]\n\nRespond with 'yes' if "
    "it is vulnerable, otherwise answer 'no'.",
    "Examine the 'Before Fix' and 'After Fix' code snippets to understand the vulnerability "
    "remediation. Determine if the 'Before Fix' version is vulnerable, and if so, explain how the "
    "'After Fix' version addresses the issue.\n\n[PAIRS]\n\nRefer to these examples. Now, analyze "
    "the following code snippet.\n\n[CODE]\n\nRespond with 'yes' if it is vulnerable, otherwise "
    "answer 'no'."};

std::string trim_newlines(std::string_view s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == '\n') s.remove_prefix(1);
    return std::string(s);
}

std::string code_block(std::string_view code) { return "```c\n" + trim_newlines(code) + "\n```"; }

std::string api_block(std::string_view api) {
    const std::string body = trim_newlines(api);
    return "API Information:\n" + (body.empty() ? std::string("none") : body);
}

bool eligible(const Exemplar& e, PromptStrategy strategy, std::string_view exclude) {
    if (strategy == PromptStrategy::FewShotContrastive && !e.paired()) return false;
    if (strategy != PromptStrategy::FewShotContrastive && e.code.empty()) return false;
    if (exclude.empty()) return true;
    if (e.id == exclude) return false;
    return std::find(e.related_ids.begin(), e.related_ids.end(), exclude) == e.related_ids.end();
}

std::string examples_block(const ExemplarStore& store, const std::vector<std::string>& ids,
                           bool with_api) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Exemplar& e = *store.find(ids[i]);
        if (i) out += "\n\n";
        out += "Code Example " + std::to_string(i + 1) + ":\n\n" + code_block(e.code) + "\n\n";
        if (with_api) out += api_block(e.api_text) + "\n\n";
        out += std::string("Output: ") + (e.vulnerable ? "yes" : "no") +
               (i + 1 < ids.size() ? ";" : ".");
    }
    return out;
}

std::string pairs_block(const ExemplarStore& store, const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Exemplar& e = *store.find(ids[i]);
        if (i) out += "\n\n";
        out += "Before Fix:\n\n" + code_block(*e.before_fix) + "\n\nAfter Fix:\n\n" +
               code_block(*e.after_fix);
    }
    return out;
}

bool parse_label(const std::string& s, bool& out) {
    if (s == "yes" || s == "vulnerable") return out = true, true;
    if (s == "no" || s == "safe") return out = false, true;
    return false;
}

}  // namespace

std::string_view to_string(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::BasicPrompt: return "basic";
        case PromptStrategy::RolePlaying: return "role-playing";
        case PromptStrategy::ChainOfThought: return "chain-of-thought";
        case PromptStrategy::InContext: return "in-context";
        case PromptStrategy::FewShotRandom: return "few-shot-random";
        case PromptStrategy::FewShotContrastive: return "few-shot-contrastive";
    }
    return "?";
}

std::optional<PromptStrategy> parse_strategy(std::string_view text) {
    for (auto s : kAllStrategies)
        if (to_string(s) == text) return s;
    return std::nullopt;
}

bool is_two_turn(PromptStrategy s) {
    return s == PromptStrategy::ChainOfThought || s == PromptStrategy::InContext;
}

bool is_few_shot(PromptStrategy s) {
    return s == PromptStrategy::FewShotRandom || s == PromptStrategy::FewShotContrastive;
}

std::string_view to_string(TurnRole r) {
    switch (r) {
        case TurnRole::System: return "system";
        case TurnRole::User: return "user";
        case TurnRole::AssistantPlaceholder: return "assistant";
    }
    return "?";
}

void ExemplarStore::add(Exemplar e) {
    if (records_.count(e.id)) throw DuplicateEntry(0, e.id);
    std::string id = e.id;
    records_.emplace(std::move(id), std::move(e));
}

const Exemplar* ExemplarStore::find(std::string_view id) const {
    const auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
}

ExemplarStore ExemplarStore::from_jsonl(std::string_view text) {
    ExemplarStore store;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw SchemaError(line_no, std::string("invalid JSON: ") + ex.what());
        }
        if (!j.is_object()) throw SchemaError(line_no, "expected an object");
        try {
            Exemplar e;
            e.id = j.at("id").get<std::string>();
            e.code = j.value("code", std::string());
            e.api_text = j.value("api_text", std::string());
            if (!parse_label(j.at("label").get<std::string>(), e.vulnerable))
                throw SchemaError(line_no, "label must be yes/no or vulnerable/safe");
            if (j.contains("before_fix")) e.before_fix = j.at("before_fix").get<std::string>();
            if (j.contains("after_fix")) e.after_fix = j.at("after_fix").get<std::string>();
            if (j.contains("related_ids"))
                e.related_ids = j.at("related_ids").get<std::vector<std::string>>();
            if (e.code.empty() && !e.paired())
                throw SchemaError(line_no, "exemplar " + e.id + " has no code");
            if (store.find(e.id)) throw DuplicateEntry(line_no, e.id);
            store.add(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw SchemaError(line_no, ex.what());
        }
    }
    return store;
}

std::vector<std::string> select_exemplars(const ExemplarStore& store, PromptStrategy strategy,
                                          std::size_t k, std::uint64_t seed,
                                          std::string_view exclude_id) {
    std::vector<std::string> pool;
    for (const auto& [id, e] : store.records())
        if (eligible(e, strategy, exclude_id)) pool.push_back(id);
    if (pool.size() < k) throw InsufficientExemplars(k, pool.size());
    std::mt19937_64 rng(seed);
    detail::sample_prefix(pool, k, rng);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('[', pos);
        if (open == std::string_view::npos) break;
        const std::size_t close = tmpl.find(']', open);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string name(tmpl.substr(open + 1, close - open - 1));
        const auto it = values.find(name);
        if (it == values.end()) throw UnresolvedPlaceholder("[" + name + "]");
        out += it->second;
        pos = close + 1;
    }
    out.append(tmpl.substr(pos));
    return out;
}

PromptBundle build_prompt(PromptStrategy strategy, const std::string& code,
                          const std::string& api_text, const ExemplarStore& store,
                          const PromptOptions& options) {
    const bool with_api = !trim_newlines(api_text).empty();
    const auto pick = [&](const Template& t) { return with_api ? t.with_api : t.without_api; };

    std::map<std::string, std::string> values{
        {"CODE", code_block(code)},
        {"INSTRUCTION", std::string(kVerdictInstruction)},
        {std::string(kReplySlot.substr(1, kReplySlot.size() - 2)), std::string(kReplySlot)},
    };
    if (with_api) values["API"] = api_block(api_text);

    PromptBundle b;
    b.strategy = strategy;
    const auto user = [&](std::string_view tmpl, bool awaits_reply = false) {
        b.turns.push_back({TurnRole::User, fill_template(tmpl, values), awaits_reply});
    };
    const auto placeholder = [&] { b.turns.push_back({TurnRole::AssistantPlaceholder, "", false}); };

    if (is_few_shot(strategy)) {
        b.seed = options.seed;
        b.exemplars = select_exemplars(store, strategy, options.exemplar_count, options.seed,
                                       options.sample_id);
        if (strategy == PromptStrategy::FewShotRandom)
            values["EXAMPLES"] = examples_block(store, b.exemplars, with_api);
        else
            values["PAIRS"] = pairs_block(store, b.exemplars);
    }

    switch (strategy) {
        case PromptStrategy::BasicPrompt: user(pick(kBasic)); break;
        case PromptStrategy::RolePlaying:
            b.turns.push_back({TurnRole::System, std::string(kRole), false});
            user(pick(kBasic));
            break;
        case PromptStrategy::ChainOfThought:
            user(pick(kChain1));
            placeholder();
            user(kChain2, true);
            break;
        case PromptStrategy::InContext:
            user(pick(kContext1));
            placeholder();
            user(pick(kContext2));
            break;
        case PromptStrategy::FewShotRandom: user(pick(kFewShot)); break;
        case PromptStrategy::FewShotContrastive: user(pick(kContrastive)); break;
    }
    b.placeholders_resolved = true;
    return b;
}

namespace {

nlohmann::ordered_json bundle_json(const PromptBundle& b) {
    nlohmann::ordered_json j;
    j["strategy"] = std::string(to_string(b.strategy));
    j["seed"] = b.seed ? nlohmann::ordered_json(*b.seed) : nlohmann::ordered_json(nullptr);
    j["exemplars"] = b.exemplars;
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    for (const auto& t : b.turns) {
        nlohmann::ordered_json m;
        m["role"] = std::string(to_string(t.role));
        if (t.role == TurnRole::AssistantPlaceholder) m["content"] = nullptr;
        else m["content"] = t.text;
        msgs.push_back(std::move(m));
    }
    j["messages"] = std::move(msgs);
    return j;
}

}  // namespace

std::string bundle_to_json(const PromptBundle& bundle) { return bundle_json(bundle).dump(2) + "\n"; }

std::string prompt_hash(const PromptBundle& bundle) { return sha256_hex(bundle_json(bundle).dump()); }

}  // namespace pacvd
