#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pacvd {

enum class PromptStrategy {
    BasicPrompt,
    RolePlaying,
    ChainOfThought,
    InContext,
    FewShotRandom,
    FewShotContrastive,
};

inline constexpr PromptStrategy kAllStrategies[] = {
    PromptStrategy::BasicPrompt,   PromptStrategy::RolePlaying,
    PromptStrategy::ChainOfThought, PromptStrategy::InContext,
    PromptStrategy::FewShotRandom, PromptStrategy::FewShotContrastive,
};

/// Kebab-case names: basic, role-playing, chain-of-thought, in-context, few-shot-random,
/// few-shot-contrastive.
std::string_view to_string(PromptStrategy s);
std::optional<PromptStrategy> parse_strategy(std::string_view text);
bool is_two_turn(PromptStrategy s);
bool is_few_shot(PromptStrategy s);

enum class TurnRole { System, User, AssistantPlaceholder };
std::string_view to_string(TurnRole r);

/// Marker left in the second CoT user turn; the gateway splices the first reply in its place.
inline constexpr std::string_view kReplySlot = "[Code Analysis]";

struct Turn {
    TurnRole role = TurnRole::User;
    std::string text;
    /// Text contains kReplySlot, to be filled with the preceding model reply.
    bool awaits_reply = false;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct PromptBundle {
    PromptStrategy strategy = PromptStrategy::BasicPrompt;
    std::vector<Turn> turns;
    bool placeholders_resolved = false;
    std::vector<std::string> exemplars;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct Exemplar {
    std::string id;
    std::string code;
    std::string api_text;
    bool vulnerable = false;
    /// Vulnerable and patched versions, present on contrastive records.
    std::optional<std::string> before_fix;
    std::optional<std::string> after_fix;
    /// Sample ids this record was derived from; used by the leakage guard.
    std::vector<std::string> related_ids;

    bool paired() const { return before_fix && after_fix; }
};

class ExemplarStore {
  public:
    ExemplarStore() = default;

    /// Throws DuplicateEntry on a repeated id.
    void add(Exemplar e);
    const Exemplar* find(std::string_view id) const;
    /// Records in id order.
    const std::map<std::string, Exemplar, std::less<>>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// One JSON object per line: {"id","code","api_text"?,"label":"yes"|"no"|"vulnerable"|"safe",
    /// "before_fix"?,"after_fix"?,"related_ids"?}. Blank lines are skipped.
    static ExemplarStore from_jsonl(std::string_view text);

  private:
    std::map<std::string, Exemplar, std::less<>> records_;
};

/// Seeded choice of `k` eligible exemplars, returned in id order. Records whose id or related ids
/// equal `exclude_id` are ineligible; contrastive selection only considers paired records and
/// random selection only records with code.
std::vector<std::string> select_exemplars(const ExemplarStore& store, PromptStrategy strategy,
                                          std::size_t k, std::uint64_t seed,
                                          std::string_view exclude_id = {});

struct PromptOptions {
    std::size_t exemplar_count = 2;
    std::uint64_t seed = 0;
    /// Id of the sample under test, kept out of the exemplars.
    std::string sample_id;
};

/// Builds the turns of `strategy` for `code`. An empty `api_text` selects the no-API templates.
PromptBundle build_prompt(PromptStrategy strategy, const std::string& code,
                          const std::string& api_text, const ExemplarStore& store,
                          const PromptOptions& options = {});

/// Single-pass substitution of `[NAME]` placeholders. Substituted text is not rescanned.
/// Throws UnresolvedPlaceholder for a name missing from `values`.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// {"strategy","seed","exemplars","messages":[{"role","content"}]}; the assistant placeholder
/// has a null content.
std::string bundle_to_json(const PromptBundle& bundle);
/// SHA-256 of the compact form of bundle_to_json.
std::string prompt_hash(const PromptBundle& bundle);

}  // namespace pacvd
