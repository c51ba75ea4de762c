#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reponav/budget_policy.hpp"
#include "reponav/hybrid_index.hpp"
#include "reponav/reasoner.hpp"
#include "reponav/relation_graph.hpp"
#include "reponav/repo_model.hpp"
#include "reponav/scout_tools.hpp"

namespace reponav {

class EmbeddingProvider;

enum class Intent { ConceptLookup, SymbolLookup, BehaviorTrace, BugLocalization, Architecture, TaskExecution };

std::string_view to_string(Intent intent);
std::optional<Intent> parse_intent(std::string_view text);

struct AugmentedQuery {
    std::string original;
    Intent intent = Intent::ConceptLookup;
    std::string rewritten;
    std::vector<std::string> keywords;
    std::optional<std::string> pseudocode_hints;
    bool degenerate = false;
};

AugmentedQuery degenerate_augmentation(const std::string& query);

/// Augment role; falls back to the degenerate form and appends a note on failure.
AugmentedQuery augment_query(const std::string& query, Reasoner& reasoner, std::vector<std::string>& notes);

/// Sparse terms derived from keywords (tokenized, de-duplicated, order kept).
std::vector<std::string> keyword_terms(const std::vector<std::string>& keywords);

struct Candidate {
    UnitId unit;
    Provenance provenance;
    int first_seen_round = 0;
    bool kept = true;
    CandidateProfile profile;
};

/// Insertion-ordered candidate set with unique unit ids.
class CandidateSet {
public:
    /// Adds or merges provenance; returns true when the unit is new.
    bool merge(const UnitId& unit, const Provenance& provenance, int round);
    const Candidate* find(const UnitId& unit) const;
    Candidate* find(const UnitId& unit);
    const std::vector<Candidate>& all() const noexcept { return items_; }
    std::vector<Candidate>& all() noexcept { return items_; }
    std::vector<UnitId> kept_ids() const;
    std::size_t kept_count() const;

private:
    std::vector<Candidate> items_;
};

struct ExpansionAddition {
    UnitId unit;
    std::string via;  ///< relation path, e.g. `f →call g`
};

/// 1-hop neighbours of kept candidates over all layers in both directions,
/// minus existing candidates, at most `cap` additions in (hop, unit_id) order.
std::vector<ExpansionAddition> expand_candidates(CandidateSet& candidates, const RelationGraph& graph, int round,
                                                 std::size_t cap);

struct ScoutEnv {
    const RepoModel& model;
    const HybridIndex& index;
    const RelationGraph& graph;
    EmbeddingProvider* provider = nullptr;
    BudgetConfig budget;
    ToolLimits limits;
    std::size_t working_set_cap = 50;
};

struct ScoutResult {
    CandidateSet candidates;
    NavState state;
    TerminalReason terminal_reason = TerminalReason::Horizon;
    nlohmann::ordered_json trace;
    int tool_calls = 0;
    int augmentation_requests = 0;
    std::vector<std::string> tool_outputs;  ///< serialized tool responses, in call order

    /// Working-set candidates with their priority scores, for selection.
    std::vector<PrioritizedUnit> prioritized(const BudgetConfig& cfg, const RepoModel& model) const;
};

inline constexpr int kTraceVersion = 1;

/// Complexity estimate, fast-path check, then augment / init / expand / refine
/// rounds until the policy terminates. Never reads unit bodies.
ScoutResult run_scout(const std::string& query, const ScoutEnv& env, Reasoner& reasoner);

nlohmann::ordered_json to_json(const NavState& state);
nlohmann::ordered_json to_json(const BudgetConfig& cfg);

}  // namespace reponav
