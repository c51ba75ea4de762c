#include "reponav/budget_policy.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "reponav/error.hpp"
#include "reponav/reasoner.hpp"

namespace reponav {

void BudgetConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
    if (c <= 0) fail("c must be positive");
    if (b_min <= 0) fail("b_min must be positive");
    if (tau <= 0 || tau > 100) fail("tau must lie in (0, 100]");
    if (epsilon <= 0) fail("epsilon must be positive");
    if (patience <= 0) fail("patience must be positive");
    if (horizon < 2) fail("horizon (T) must be at least 2");
    if (w1 < 0 || w2 < 0 || w3 < 0) fail("weights must be non-negative");
    if (std::abs(w1 + w2 + w3 - 1.0) > 1e-9) fail("weights must sum to 1");
    if (k <= 0) fail("k must be positive");
}

std::string_view to_string(TerminalReason reason) {
    switch (reason) {
        case TerminalReason::Sufficiency: return "Sufficiency";
        case TerminalReason::Inefficiency: return "Inefficiency";
        case TerminalReason::Exhaustion: return "Exhaustion";
        case TerminalReason::Horizon: return "Horizon";
        case TerminalReason::FastPathComplete: return "FastPathComplete";
        case TerminalReason::Voluntary: return "Voluntary";
        case TerminalReason::ExhaustionDegenerate: return "Exhaustion-degenerate";
    }
    return "unknown";
}

std::string PolicyDecision::describe() const {
    switch (kind) {
        case Kind::Continue: return "Continue";
        case Kind::FastPath: return "FastPath";
        case Kind::Terminate: return "Terminate(" + std::string(to_string(*reason)) + ")";
    }
    return "unknown";
}

ComplexityEstimate estimate_complexity(const std::string& query, Reasoner& reasoner) {
    ComplexityEstimate est;
    ReasonerRequest req;
    req.role = Role::Complexity;
    req.payload["query"] = query;
    try {
        auto r = reasoner.request(req);
        est.d_q = std::clamp(r["complexity"].get<double>(), 0.0, 100.0);
        if (r.contains("confidence")) est.kappa0 = std::clamp(r["confidence"].get<double>(), 0.0, 100.0);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ScriptExhausted) throw;
        est.note = std::string("complexity defaulted: ") + e.what();
    }
    return est;
}

double repo_entropy(const RepoStats& stats) {
    double files = std::max<double>(static_cast<double>(stats.file_count), 1.0);
    return std::clamp(0.5 + 0.3 * std::log10(files) + 0.1 * stats.mean_dir_depth, 0.5, 2.0);
}

int compute_budget(double d_q, double h_r, const BudgetConfig& cfg) {
    return std::max(cfg.b_min, static_cast<int>(std::lround(cfg.c * d_q * h_r)));
}

Igr info_gain_rate(const IterationRecord& prev, double kappa, int l_t) {
    if (l_t <= prev.l_t) return std::nullopt;
    return (kappa - prev.kappa) / static_cast<double>(l_t - prev.l_t);
}

PolicyDecision should_terminate(const NavState& state, const std::vector<IterationRecord>& history,
                                const BudgetConfig& cfg, int next_round_cost_estimate) {
    if (state.t == 0) return state.kappa >= cfg.tau ? PolicyDecision::fast_path() : PolicyDecision::proceed();
    if (state.t >= cfg.horizon) return PolicyDecision::stop(TerminalReason::Horizon);
    if (state.kappa >= cfg.tau) return PolicyDecision::stop(TerminalReason::Sufficiency);
    if (next_round_cost_estimate > state.budget - state.l_t) return PolicyDecision::stop(TerminalReason::Exhaustion);

    int low = 0;
    for (auto it = history.rbegin(); it != history.rend() && low < cfg.patience; ++it) {
        if (!it->has_igr) break;
        if (it->igr && *it->igr >= cfg.epsilon) break;
        ++low;
    }
    if (low >= cfg.patience) return PolicyDecision::stop(TerminalReason::Inefficiency);
    return PolicyDecision::proceed();
}

PolicyTracker::PolicyTracker(BudgetConfig cfg, double d_q, double h_r, std::optional<int> budget) : cfg_(cfg) {
    state_.d_q = std::clamp(d_q, 0.0, 100.0);
    state_.h_r = std::clamp(h_r, 0.5, 2.0);
    state_.budget = budget ? *budget : compute_budget(state_.d_q, state_.h_r, cfg_);
}

PolicyDecision PolicyTracker::pre_assess(double kappa0) {
    state_.t = 0;
    state_.kappa = std::clamp(kappa0, 0.0, 100.0);
    return should_terminate(state_, history_, cfg_, 0);
}

int PolicyTracker::begin_round() {
    state_.t += 1;
    round_open_ = true;
    return state_.t;
}

PolicyDecision PolicyTracker::observe(double kappa, int projected_cost) {
    if (!round_open_) begin_round();
    round_open_ = false;
    projected_cost = std::max(projected_cost, 0);
    IterationRecord rec;
    rec.t = state_.t;
    rec.kappa = std::clamp(kappa, 0.0, 100.0);
    rec.l_t = state_.l_t + projected_cost;
    if (!history_.empty()) {
        rec.has_igr = true;
        rec.igr = info_gain_rate(history_.back(), rec.kappa, rec.l_t);
    }
    state_.kappa = rec.kappa;
    history_.push_back(rec);

    auto decision = should_terminate(state_, history_, cfg_, projected_cost);
    bool exhausted = decision.reason == TerminalReason::Exhaustion;
    if (exhausted) {
        // Nothing was committed, so the round adds no volume.
        history_.back().l_t = state_.l_t;
        if (history_.size() > 1) history_.back().igr = info_gain_rate(history_[history_.size() - 2], rec.kappa, state_.l_t);
    } else {
        state_.l_t = rec.l_t;
    }
    history_.back().decision = decision.describe();
    return decision;
}

double unit_density(int line_count) {
    return 1.0 / (1.0 + std::log(1.0 + static_cast<double>(std::max(line_count, 0))));
}

PrioritizedUnit priority_score(const UnitId& unit, double rel, bool tool_flag, int line_count, const BudgetConfig& cfg) {
    PrioritizedUnit p;
    p.unit = unit;
    p.rel = std::clamp(rel, 0.0, 1.0);
    p.tool_flag = tool_flag ? 1 : 0;
    p.density = unit_density(line_count);
    p.line_count = line_count;
    p.priority = cfg.w1 * p.rel + cfg.w2 * p.tool_flag + cfg.w3 * p.density;
    return p;
}

void sort_by_priority(std::vector<PrioritizedUnit>& units) {
    std::sort(units.begin(), units.end(), [](const PrioritizedUnit& a, const PrioritizedUnit& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.unit < b.unit;
    });
}

Selection select_units(std::vector<PrioritizedUnit> units, int budget,
                       const std::function<bool(const UnitId&, const UnitId&)>& is_ancestor) {
    sort_by_priority(units);
    Selection s;
    for (const auto& u : units) {
        bool covered = is_ancestor && std::any_of(s.selected.begin(), s.selected.end(),
                                                  [&](const SelectedUnit& sel) { return is_ancestor(sel.unit, u.unit); });
        if (!covered && s.total_lines + u.line_count <= budget) {
            s.selected.push_back({u.unit, u.line_count, false, u.priority});
            s.total_lines += u.line_count;
        } else {
            s.omitted.push_back(u.unit);
        }
    }
    if (s.selected.empty() && !units.empty()) {
        const auto& top = units.front();
        int lines = std::min(top.line_count, std::max(budget, 0));
        s.selected.push_back({top.unit, lines, lines < top.line_count, top.priority});
        s.total_lines = lines;
        s.omitted.erase(s.omitted.begin());
    }
    return s;
}

ContextPack select_context(const RepoModel& model, std::vector<PrioritizedUnit> candidates, int budget) {
    auto selection = select_units(std::move(candidates), budget, [&](const UnitId& a, const UnitId& u) {
        return model.is_ancestor(a, u);
    });
    ContextPack pack;
    pack.budget = budget;
    pack.total_lines = selection.total_lines;
    pack.omitted = std::move(selection.omitted);
    for (const auto& sel : selection.selected) {
        const CodeUnit& unit = model.at(sel.unit);
        PackedUnit p;
        p.unit = unit.id;
        p.path = unit.path;
        p.span = LineSpan{unit.span.start, unit.span.start + sel.line_count - 1};
        p.truncated = sel.truncated;
        p.priority = sel.priority;
        for (const auto& line : read_lines(model.absolute(unit.path), p.span)) {
            p.body += line;
            p.body += '\n';
        }
        if (p.truncated) {
            p.body += kTruncationMarker;
            p.body += '\n';
        }
        pack.units.push_back(std::move(p));
    }
    return pack;
}

}  // namespace reponav
