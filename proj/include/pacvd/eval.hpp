#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pacvd/abstraction.hpp"
#include "pacvd/catalog.hpp"
#include "pacvd/gateway.hpp"
#include "pacvd/prompt.hpp"

namespace pacvd {

// ---- dataset ----

struct CalleeRecord {
    std::string name;
    std::string code;
    int depth = 1;

    friend bool operator==(const CalleeRecord&, const CalleeRecord&) = default;
};

struct SampleRecord {
    std::string id;
    std::optional<std::string> cve;
    std::optional<std::string> cwe;
    std::string project;
    std::string commit;
    std::string target_name;
    std::string target_code;
    std::vector<CalleeRecord> callees;
    bool vulnerable = false;
    /// Target code does not parse; context strategies that need the AST degrade to empty text.
    bool degraded = false;
};

/// One JSON object per line: {"id","cve"?,"cwe"?,"project"?,"commit"?,"target_name",
/// "target_code","callees":[{"name","code","depth"}],"label":"vulnerable"|"safe"}.
/// Blank lines are skipped. Throws SchemaError with the 1-based line number.
std::vector<SampleRecord> parse_dataset(std::string_view text);
std::vector<SampleRecord> load_dataset(const std::string& path);
/// Single-line JSON form of a record (without the derived degraded flag).
std::string sample_to_json(const SampleRecord& s);

// ---- context strategies ----

enum class ContextKind { None, Abstraction, AllCallees, ApiGuided, Similarity, Random, Hierarchy };

struct ContextStrategy {
    ContextKind kind = ContextKind::Abstraction;
    AbstractionLevel level = AbstractionLevel::A3;

    friend bool operator==(const ContextStrategy&, const ContextStrategy&) = default;
};

/// "none", "A1".."A4", "all-callees", "api-guided", "similarity", "random", "hierarchy".
std::string to_string(const ContextStrategy& s);
std::optional<ContextStrategy> parse_context_strategy(std::string_view text);

struct ContextOptions {
    /// Call depth bound shared by the abstraction and every raw-code baseline.
    int depth_limit = 3;
    /// Callees kept by the similarity, random and hierarchy samplers.
    std::size_t sample_size = 3;
    /// Weights of token Jaccard, call Jaccard, edit similarity and BM25.
    std::array<double, 4> similarity_weights{1, 1, 1, 1};
    bool include_fuzzy_at_a2 = false;
};

struct ContextResult {
    std::string text;
    /// Callees whose code is included, in output order.
    std::vector<std::string> selected;
    /// Fewer callees were available than the sampler asked for, or the target did not parse.
    bool flagged = false;
};

ContextResult build_context(const SampleRecord& sample, const ContextStrategy& strategy,
                            const ApiCatalog& catalog, std::uint64_t seed,
                            const ContextOptions& options = {});

// ---- similarity ----

/// Lexer tokens; falls back to whitespace/punctuation splitting on text the lexer rejects.
std::vector<std::string> code_tokens(std::string_view code);
/// Names followed by "(" that are not keywords.
std::set<std::string> call_names(std::string_view code);

/// |A ∩ B| / |A ∪ B|, defined as 1 for two empty sets.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Unit-cost edit distance between two sequences.
template <class Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

/// 1 - levenshtein / max length; 1 for two empty sequences.
double edit_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Okapi BM25 over a fixed document collection.
class Bm25 {
  public:
    explicit Bm25(std::vector<std::vector<std::string>> documents, double k1 = 1.2,
                  double b = 0.75);
    /// ln((N - df + 0.5) / (df + 0.5) + 1).
    double idf(const std::string& term) const;
    /// Sum over distinct query terms.
    double score(const std::vector<std::string>& query, std::size_t doc) const;
    std::size_t size() const { return docs_.size(); }

  private:
    std::vector<std::map<std::string, std::size_t>> tf_;
    std::vector<std::size_t> lengths_;
    std::map<std::string, std::size_t> df_;
    std::vector<std::vector<std::string>> docs_;
    double avgdl_ = 0;
    double k1_;
    double b_;
};

struct SimilarityComponents {
    double token_jaccard = 0;
    double call_jaccard = 0;
    double edit = 0;
    /// Min-max normalized over the callee collection.
    double bm25 = 0;

    double combined(const std::array<double, 4>& weights = {1, 1, 1, 1}) const;
};

/// Components for every callee against the target; BM25 uses the callees as its corpus.
std::vector<SimilarityComponents> similarity_components(const std::string& target,
                                                        const std::vector<std::string>& callees);

// ---- metrics ----

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    /// Predictions that could not be parsed; already counted as "no" in fn/tn.
    std::size_t unparseable = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    void add(bool vulnerable, VerdictLabel predicted);
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Metrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double mcc = 0;
};

/// Zero conventions: precision, recall and F1 are 0 when undefined; MCC is 0 when any marginal
/// is 0; accuracy is 0 on an empty matrix.
Metrics compute_metrics(const ConfusionMatrix& cm);

struct ScoreResult {
    ConfusionMatrix confusion;
    Metrics metrics;
};

/// Throws EmptyInput on an empty list.
ScoreResult score(const std::vector<std::pair<bool, VerdictLabel>>& predictions);

// ---- grid ----

struct GridOptions {
    std::vector<ContextStrategy> contexts;
    std::vector<PromptStrategy> strategies;
    std::uint64_t seed = 0;
    /// Run directory; empty keeps everything in memory.
    std::string out_dir;
    bool resume = false;
    std::size_t concurrency = 4;
    std::size_t exemplar_count = 2;
    ContextOptions context;
};

struct CellReport {
    ContextStrategy context;
    PromptStrategy strategy = PromptStrategy::BasicPrompt;
    /// Empty on success.
    std::string error;
    ScoreResult overall;
    std::map<std::string, ScoreResult> per_cwe;
    std::size_t degraded = 0;
    std::size_t flagged_contexts = 0;
    std::size_t cache_hits = 0;
    std::size_t dispatched = 0;
};

struct EvalRun {
    std::string provider_id;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::vector<CellReport> cells;
};

/// Per-sample seed used by the samplers and exemplar selection.
std::uint64_t sample_seed(std::uint64_t seed, std::string_view sample_id);

/// Evaluates every (context, strategy) cell. With an out_dir, each dialogue is written to
/// verdicts/<key>.json and reused under `resume`; run.json and table.txt are written at the end.
/// Throws EmptyInput for an empty grid or dataset; failures inside a cell are recorded on it.
EvalRun run_grid(const std::vector<SampleRecord>& samples, const ApiCatalog& catalog,
                 Gateway& gateway, const GridOptions& options);

/// Deterministic JSON (no timings, no cache statistics).
std::string run_to_json(const EvalRun& run);
/// Percent table with Accuracy/Precision/Recall/F1/MCC columns.
std::string format_table(const EvalRun& run);

}  // namespace pacvd
