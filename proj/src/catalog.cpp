#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "pacvd/catalog.hpp"
#include "pacvd/errors.hpp"

namespace pacvd {

namespace {

constexpr std::array<std::pair<ApiCategory, std::string_view>, 9> kCategories = {{
    {ApiCategory::MemoryAlloc, "memory-alloc"},
    {ApiCategory::MemoryFree, "memory-free"},
    {ApiCategory::FileOpen, "file-open"},
    {ApiCategory::FileClose, "file-close"},
    {ApiCategory::DirOpen, "dir-open"},
    {ApiCategory::DirClose, "dir-close"},
    {ApiCategory::Lock, "lock"},
    {ApiCategory::Unlock, "unlock"},
    {ApiCategory::OtherResource, "other-resource"},
}};

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

ApiEntry entry(std::string name, ApiCategory c, std::optional<std::string> canonical = {}) {
    return ApiEntry{std::move(name), c, std::move(canonical), {}};
}

}  // namespace

std::string_view to_string(ApiCategory c) {
    for (const auto& [cat, text] : kCategories)
        if (cat == c) return text;
    return "other-resource";
}

std::optional<ApiCategory> parse_category(std::string_view text) {
    for (const auto& [cat, name] : kCategories)
        if (name == text) return cat;
    return std::nullopt;
}

bool is_release(ApiCategory c) {
    return c == ApiCategory::MemoryFree || c == ApiCategory::FileClose ||
           c == ApiCategory::DirClose || c == ApiCategory::Unlock;
}

const ApiEntry* ApiCatalog::find(std::string_view name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<std::string> ApiCatalog::canonical_order() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (std::find(out.begin(), out.end(), e.canonical_name()) == out.end())
            out.push_back(e.canonical_name());
    return out;
}

std::vector<std::string> ApiCatalog::partners(std::string_view canonical) const {
    std::vector<std::string> out;
    auto canon = [&](const std::string& n) -> std::string {
        const ApiEntry* e = find(n);
        return e ? e->canonical_name() : n;
    };
    for (const auto& [acq, rel] : pairs) {
        const std::string a = canon(acq), r = canon(rel);
        const std::string* other = a == canonical ? &r : r == canonical ? &a : nullptr;
        if (other && *other != canonical &&
            std::find(out.begin(), out.end(), *other) == out.end())
            out.push_back(*other);
    }
    return out;
}

ApiCatalog default_catalog() {
    ApiCatalog c;
    c.version = "default-1";
    c.entries = {
        entry("malloc", ApiCategory::MemoryAlloc),
        entry("calloc", ApiCategory::MemoryAlloc, "malloc"),
        entry("realloc", ApiCategory::MemoryAlloc, "malloc"),
        entry("free", ApiCategory::MemoryFree),
        entry("open", ApiCategory::FileOpen),
        entry("fopen", ApiCategory::FileOpen),
        entry("fdopen", ApiCategory::FileOpen),
        entry("opendir", ApiCategory::DirOpen),
        entry("close", ApiCategory::FileClose),
        entry("fclose", ApiCategory::FileClose),
        entry("closedir", ApiCategory::DirClose),
    };
    c.pairs = {
        {"malloc", "free"},  {"calloc", "free"},   {"realloc", "free"},     {"open", "close"},
        {"fopen", "fclose"}, {"fdopen", "fclose"}, {"opendir", "closedir"},
    };
    return c;
}

ApiCatalog load_catalog(std::string_view document) {
    ApiCatalog c;
    bool have_version = false;
    std::vector<std::size_t> entry_lines;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= document.size()) {
        const auto nl = document.find('\n', pos);
        std::string_view line = document.substr(pos, nl == std::string_view::npos ? document.npos
                                                                                 : nl - pos);
        pos = nl == std::string_view::npos ? document.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const auto words = split_ws(line);
        if (words.empty()) continue;
        const std::string& kw = words[0];
        if (kw == "version") {
            if (have_version) throw SchemaError(line_no, "second version line");
            if (words.size() != 2) throw SchemaError(line_no, "version takes one token");
            c.version = words[1];
            have_version = true;
        } else if (kw == "api") {
            if (words.size() < 3) throw SchemaError(line_no, "api needs a name and a category");
            if (!is_identifier(words[1]))
                throw SchemaError(line_no, "invalid api name '" + words[1] + "'");
            if (c.find(words[1])) throw DuplicateEntry(line_no, words[1]);
            const auto cat = parse_category(words[2]);
            if (!cat) throw SchemaError(line_no, "unknown category '" + words[2] + "'");
            ApiEntry e = entry(words[1], *cat);
            bool seen_canonical = false, seen_cwe = false;
            for (std::size_t i = 3; i < words.size(); ++i) {
                const std::string& w = words[i];
                if (w.rfind("canonical=", 0) == 0 && !seen_canonical) {
                    e.canonical = w.substr(10);
                    if (!is_identifier(*e.canonical))
                        throw SchemaError(line_no, "invalid canonical name in '" + w + "'");
                    seen_canonical = true;
                } else if (w.rfind("cwe=", 0) == 0 && !seen_cwe) {
                    e.cwes = split_commas(w.substr(4));
                    for (const auto& id : e.cwes)
                        if (id.empty()) throw SchemaError(line_no, "empty cwe id in '" + w + "'");
                    seen_cwe = true;
                } else {
                    throw SchemaError(line_no, "unexpected attribute '" + w + "'");
                }
            }
            c.entries.push_back(std::move(e));
            entry_lines.push_back(line_no);
        } else if (kw == "pair") {
            if (words.size() != 3) throw SchemaError(line_no, "pair takes two names");
            for (std::size_t i = 1; i < 3; ++i)
                if (!c.find(words[i]))
                    throw SchemaError(line_no, "pair references undeclared api '" + words[i] + "'");
            const std::pair<std::string, std::string> p{words[1], words[2]};
            if (std::find(c.pairs.begin(), c.pairs.end(), p) != c.pairs.end())
                throw DuplicateEntry(line_no, "pair " + p.first + " " + p.second);
            c.pairs.push_back(p);
        } else {
            throw SchemaError(line_no, "unknown directive '" + kw + "'");
        }
    }
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const auto& e = c.entries[i];
        if (!e.canonical) continue;
        const ApiEntry* head = c.find(*e.canonical);
        if (!head || head == &e)
            throw SchemaError(entry_lines[i], "canonical '" + *e.canonical + "' of " + e.name +
                                                  " must name another entry");
        if (head->canonical)
            throw SchemaError(entry_lines[i], "canonical '" + *e.canonical +
                                                  "' is itself canonicalized");
    }
    return c;
}

std::string serialize_catalog(const ApiCatalog& c) {
    std::string out;
    if (!c.version.empty()) out += "version " + c.version + "\n";
    for (const auto& e : c.entries) {
        out += "api " + e.name + " " + std::string(to_string(e.category));
        if (e.canonical) out += " canonical=" + *e.canonical;
        if (!e.cwes.empty()) {
            out += " cwe=";
            for (std::size_t i = 0; i < e.cwes.size(); ++i) out += (i ? "," : "") + e.cwes[i];
        }
        out += "\n";
    }
    for (const auto& [a, r] : c.pairs) out += "pair " + a + " " + r + "\n";
    return out;
}

std::optional<ApiEntry> match_call(const ApiCatalog& catalog, std::string_view callee) {
    if (const ApiEntry* e = catalog.find(callee)) return *e;
    return std::nullopt;
}

std::vector<std::string> lint(const ApiCatalog& catalog) {
    std::vector<std::string> out;
    for (const auto& e : catalog.entries) {
        if (!is_release(e.category)) continue;
        const bool paired = std::any_of(catalog.pairs.begin(), catalog.pairs.end(),
                                        [&](const auto& p) { return p.second == e.name; });
        if (!paired) out.push_back("release api '" + e.name + "' is not the target of any pair");
    }
    return out;
}

}  // namespace pacvd
