#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pacvd {

enum class ApiCategory {
    MemoryAlloc,
    MemoryFree,
    FileOpen,
    FileClose,
    DirOpen,
    DirClose,
    Lock,
    Unlock,
    OtherResource,
};

std::string_view to_string(ApiCategory c);
std::optional<ApiCategory> parse_category(std::string_view text);
/// True for categories that release a resource (free, close, closedir, unlock).
bool is_release(ApiCategory c);

struct ApiEntry {
    std::string name;
    ApiCategory category = ApiCategory::OtherResource;
    /// Family head, e.g. `malloc` for calloc and realloc.
    std::optional<std::string> canonical;
    std::vector<std::string> cwes;

    const std::string& canonical_name() const { return canonical ? *canonical : name; }

    friend bool operator==(const ApiEntry&, const ApiEntry&) = default;
};

struct ApiCatalog {
    std::string version;
    std::vector<ApiEntry> entries;
    /// (acquire, release)
    std::vector<std::pair<std::string, std::string>> pairs;

    const ApiEntry* find(std::string_view name) const;
    /// Canonical family heads in entry order: each appears once, at its first member.
    std::vector<std::string> canonical_order() const;
    /// Canonical names paired with canonical `name` in either direction, in pair order.
    std::vector<std::string> partners(std::string_view canonical) const;

    friend bool operator==(const ApiCatalog&, const ApiCatalog&) = default;
};

/// Built-in catalog: malloc/calloc/realloc/free, open/fopen/fdopen/opendir and
/// close/fclose/closedir with their acquire/release pairs.
ApiCatalog default_catalog();

/// Parses the line-oriented catalog document:
///   version <text>
///   api <name> <category> [canonical=<name>] [cwe=<id>,<id>...]
///   pair <acquire> <release>
/// `#` starts a comment. Throws SchemaError or DuplicateEntry.
ApiCatalog load_catalog(std::string_view document);

/// Canonical document text; load_catalog(serialize_catalog(c)) == c.
std::string serialize_catalog(const ApiCatalog& catalog);

/// Exact-name lookup; no fuzzy or wrapper matching.
std::optional<ApiEntry> match_call(const ApiCatalog& catalog, std::string_view callee);

/// Non-fatal findings, e.g. a release entry that no pair references.
std::vector<std::string> lint(const ApiCatalog& catalog);

}  // namespace pacvd
