#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reponav/repo_model.hpp"

namespace reponav {

class Reasoner;

struct BudgetConfig {
    double c = 20.0;  ///< lines per complexity point
    int b_min = 200;
    double tau = 90.0;
    double epsilon = 0.01;
    int patience = 2;
    int horizon = 6;  ///< T
    double w1 = 0.6;
    double w2 = 0.3;
    double w3 = 0.1;
    int k = 20;

    /// Throws ConfigError on violated bounds.
    void validate() const;
};

struct NavState {
    double d_q = 50.0;
    double h_r = 0.5;
    int l_t = 0;
    int t = 0;
    double kappa = 0.0;
    int budget = 0;
};

/// Information gain rate; nullopt is the undefined sentinel (L unchanged).
using Igr = std::optional<double>;

struct IterationRecord {
    int t = 0;
    double kappa = 0.0;
    int l_t = 0;
    bool has_igr = false;  ///< false for the first round (no predecessor)
    Igr igr;
    std::string decision;
};

enum class TerminalReason {
    Sufficiency,
    Inefficiency,
    Exhaustion,
    Horizon,
    FastPathComplete,
    Voluntary,
    ExhaustionDegenerate,
};

std::string_view to_string(TerminalReason reason);

struct PolicyDecision {
    enum class Kind { Continue, FastPath, Terminate };
    Kind kind = Kind::Continue;
    std::optional<TerminalReason> reason;

    static PolicyDecision proceed() { return {}; }
    static PolicyDecision fast_path() { return {Kind::FastPath, std::nullopt}; }
    static PolicyDecision stop(TerminalReason r) { return {Kind::Terminate, r}; }
    std::string describe() const;
};

struct ComplexityEstimate {
    double d_q = 50.0;
    double kappa0 = 0.0;
    std::optional<std::string> note;  ///< set when the default was used
};

/// Complexity role with clamping; any reasoner failure yields D_q = 50, κ₀ = 0.
ComplexityEstimate estimate_complexity(const std::string& query, Reasoner& reasoner);

double repo_entropy(const RepoStats& stats);
int compute_budget(double d_q, double h_r, const BudgetConfig& cfg);
Igr info_gain_rate(const IterationRecord& prev, double kappa, int l_t);

/// Pure termination rule. `state.l_t` is the committed volume before this round's
/// projected cost. At t = 0 the only outcomes are FastPath and Continue.
PolicyDecision should_terminate(const NavState& state, const std::vector<IterationRecord>& history,
                                const BudgetConfig& cfg, int next_round_cost_estimate);

/// Drives NavState across rounds: each observation supplies κ_t and the line
/// cost of newly kept units.
class PolicyTracker {
public:
    /// Budget from compute_budget unless `budget` is given.
    PolicyTracker(BudgetConfig cfg, double d_q, double h_r, std::optional<int> budget = std::nullopt);

    PolicyDecision pre_assess(double kappa0);
    /// Opens round t + 1 without evaluating the policy.
    int begin_round();
    /// Evaluates the open round (opening one if needed) and commits the cost
    /// unless the outcome is Exhaustion.
    PolicyDecision observe(double kappa, int projected_cost);

    const NavState& state() const noexcept { return state_; }
    const std::vector<IterationRecord>& history() const noexcept { return history_; }
    const BudgetConfig& config() const noexcept { return cfg_; }

private:
    BudgetConfig cfg_;
    NavState state_;
    std::vector<IterationRecord> history_;
    bool round_open_ = false;
};

double unit_density(int line_count);

struct PrioritizedUnit {
    UnitId unit;
    double rel = 0.0;
    int tool_flag = 0;
    double density = 1.0;
    double priority = 0.0;
    int line_count = 0;
};

PrioritizedUnit priority_score(const UnitId& unit, double rel, bool tool_flag, int line_count, const BudgetConfig& cfg);

/// Descending priority, unit_id ascending on ties.
void sort_by_priority(std::vector<PrioritizedUnit>& units);

struct SelectedUnit {
    UnitId unit;
    int line_count = 0;  ///< lines included (after truncation)
    bool truncated = false;
    double priority = 0.0;
};

struct Selection {
    std::vector<SelectedUnit> selected;
    std::vector<UnitId> omitted;
    int total_lines = 0;
};

/// Greedy walk in priority order. `is_ancestor(a, u)` reports body containment.
Selection select_units(std::vector<PrioritizedUnit> units, int budget,
                       const std::function<bool(const UnitId&, const UnitId&)>& is_ancestor = {});

inline constexpr std::string_view kTruncationMarker = "... [truncated to fit the line budget]";

struct PackedUnit {
    UnitId unit;
    std::string path;
    LineSpan span;  ///< lines actually included
    bool truncated = false;
    double priority = 0.0;
    std::string body;
};

struct ContextPack {
    std::vector<PackedUnit> units;
    int total_lines = 0;
    int budget = 0;
    std::vector<UnitId> omitted;
};

/// select_units plus body reads from disk.
ContextPack select_context(const RepoModel& model, std::vector<PrioritizedUnit> candidates, int budget);

}  // namespace reponav
