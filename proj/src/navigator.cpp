#include "reponav/navigator.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "reponav/error.hpp"

namespace reponav {

namespace {

constexpr Intent kIntents[] = {Intent::ConceptLookup,   Intent::SymbolLookup, Intent::BehaviorTrace,
                               Intent::BugLocalization, Intent::Architecture, Intent::TaskExecution};
constexpr std::size_t kMaxToolCalls = 3;
constexpr std::size_t kMaxRelationNotes = 3;
const char* const kRetrievalStream = "Alignment Parameters";
const char* const kToolStream = "Exploratory Tool Calls";

bool recoverable(const Error& e) {
    return e.code() == ErrorCode::ReasonerUnavailable || e.code() == ErrorCode::MalformedAfterRetry;
}

std::string summarize_tool(const nlohmann::json& request, const nlohmann::json& response) {
    std::string tool = request.value("tool", std::string("?"));
    nlohmann::json args = request.value("args", nlohmann::json::object());
    if (!response.value("ok", false)) {
        std::string code = "error";
        if (!response["diagnostics"].empty()) code = response["diagnostics"][0].value("code", code);
        return fmt::format("{} {}: {}", tool, args.dump(), code);
    }
    const auto& p = response["payload"];
    if (tool == "search") {
        std::vector<std::string> files;
        for (const auto& f : p["files"]) files.push_back(fmt::format("{} {}", f["path"].get<std::string>(), f["matches"].get<std::size_t>()));
        return fmt::format("search /{}/: {} matches{}{}{}", p["pattern"].get<std::string>(), p["total_matches"].get<std::size_t>(),
                           files.empty() ? "" : " in ", fmt::join(files, ", "), p["truncated"].get<bool>() ? " (truncated)" : "");
    }
    std::vector<std::string> entries;
    for (const auto& e : p["entries"]) {
        if (e["kind"] == "dir") {
            entries.push_back(e["name"].get<std::string>() + "/");
        } else {
            entries.push_back(fmt::format("{} ({})", e["name"].get<std::string>(), e["lines"].get<int>()));
        }
    }
    return fmt::format("traverse {}: {}{}", p["path"].get<std::string>(), fmt::join(entries, ", "),
                       p["truncated"].get<bool>() ? " (truncated)" : "");
}

double candidate_priority(const Candidate& c, const RepoModel& model, const BudgetConfig& cfg) {
    return priority_score(c.unit, c.provenance.retrieval.value_or(0.0), c.provenance.tool_matches.has_value(),
                          model.at(c.unit).line_count, cfg)
        .priority;
}

class Session {
public:
    Session(const std::string& query, const ScoutEnv& env, Reasoner& reasoner, ScoutResult& out)
        : query_(query), env_(env), reasoner_(reasoner), out_(out) {}

    void run();

private:
    nlohmann::ordered_json new_round(int t) {
        nlohmann::ordered_json r;
        r["t"] = t;
        r["streams"] = nlohmann::ordered_json::array();
        r["tool_calls"] = nlohmann::ordered_json::array();
        r["retrieval"] = nlohmann::ordered_json::array();
        r["expansion"] = nlohmann::ordered_json::array();
        r["decision"] = nullptr;
        r["notes"] = nlohmann::ordered_json::array();
        return r;
    }

    void finish_round(nlohmann::ordered_json& round) {
        round["working_set"] = out_.candidates.kept_count();
        round["state"] = to_json(tracker_->state());
        const auto& hist = tracker_->history();
        if (!hist.empty() && hist.back().t == tracker_->state().t && hist.back().has_igr) {
            round["igr"] = hist.back().igr ? nlohmann::ordered_json(*hist.back().igr) : nlohmann::ordered_json("undefined");
        }
        rounds_.push_back(std::move(round));
    }

    void retrieval(const std::vector<std::string>& terms, const std::string& dense_text, int t,
                   nlohmann::ordered_json& round) {
        round["streams"].push_back(kRetrievalStream);
        auto result = hybrid_search(env_.index, terms, dense_text, env_.provider, static_cast<std::size_t>(env_.budget.k));
        if (result.dense_note) round["notes"].push_back(*result.dense_note);
        for (const auto& hit : result.fused) {
            double rel = result.relevance.at(hit.unit);
            Provenance p;
            p.retrieval = rel;
            out_.candidates.merge(hit.unit, p, t);
            round["retrieval"].push_back({{"unit", hit.unit.value}, {"rank", hit.rank}, {"rel", rel}});
        }
    }

    void run_tools(const std::vector<nlohmann::json>& calls, int t, nlohmann::ordered_json& round) {
        if (calls.empty()) return;
        round["streams"].push_back(kToolStream);
        for (std::size_t i = 0; i < calls.size() && i < kMaxToolCalls; ++i) {
            nlohmann::json request = {{"tool", calls[i].value("tool", std::string())},
                                      {"args", calls[i].value("args", nlohmann::json::object())}};
            auto response = run_tool(env_.model, request, env_.limits);
            ++out_.tool_calls;
            out_.tool_outputs.push_back(response.dump());
            tool_summaries_.push_back(summarize_tool(request, response));
            round["tool_calls"].push_back({{"request", request}, {"response", response}});
            if (!response["ok"].get<bool>()) {
                round["notes"].push_back("tool error: " + tool_summaries_.back());
                continue;
            }
            if (request["tool"] == "search") {
                for (const auto& f : response["payload"]["files"])
                    for (const auto& u : f["units"]) {
                        Provenance p;
                        p.tool_matches = u["count"].get<std::size_t>();
                        out_.candidates.merge(UnitId(u["unit"].get<std::string>()), p, t);
                    }
            }
        }
    }

    void expand(int t, nlohmann::ordered_json& round) {
        auto added = expand_candidates(out_.candidates, env_.graph, t, out_.candidates.kept_count());
        for (const auto& a : added) round["expansion"].push_back({{"unit", a.unit.value}, {"via", a.via}});
    }

    void cap_working_set(nlohmann::ordered_json& round) {
        if (out_.candidates.kept_count() <= env_.working_set_cap) return;
        std::vector<std::pair<double, Candidate*>> kept;
        for (auto& c : out_.candidates.all())
            if (c.kept) kept.emplace_back(candidate_priority(c, env_.model, env_.budget), &c);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second->unit < b.second->unit;
        });
        for (std::size_t i = env_.working_set_cap; i < kept.size(); ++i) kept[i].second->kept = false;
        round["notes"].push_back(fmt::format("working set capped at {}", env_.working_set_cap));
    }

    std::string render_profiles() {
        std::string text;
        auto ids = out_.candidates.kept_ids();
        for (auto& c : out_.candidates.all()) {
            if (!c.kept) continue;
            auto notes = relation_notes(env_.graph, c.unit, ids);
            if (notes.size() > kMaxRelationNotes) notes.resize(kMaxRelationNotes);
            c.profile = render_candidate_profile(env_.model.at(c.unit), c.provenance, notes);
            text += c.profile.text;
        }
        return text;
    }

    /// Returns true when the session ends this round.
    bool refine(int t, nlohmann::ordered_json& round) {
        const auto& st = tracker_->state();
        ReasonerRequest req;
        req.role = Role::RefineDecision;
        req.payload["query"] = query_;
        req.payload["state"] = fmt::format("round {} of {}; budget {} lines; committed {} lines", t,
                                           env_.budget.horizon, st.budget, st.l_t);
        if (!tool_summaries_.empty()) req.payload["tool results"] = fmt::format("{}", fmt::join(tool_summaries_, "\n"));
        req.payload["candidates"] = render_profiles();
        tool_summaries_.clear();

        double kappa = st.kappa;
        std::vector<UnitId> keep;
        bool voluntary = false;
        pending_tools_.clear();
        nlohmann::ordered_json decision;
        try {
            auto r = reasoner_.request(req);
            std::set<UnitId> current;
            for (const auto& id : out_.candidates.kept_ids()) current.insert(id);
            std::set<UnitId> seen;
            for (const auto& k : r["keep"]) {
                UnitId id(k.get<std::string>());
                if (!current.count(id)) {
                    round["notes"].push_back("dropped unknown keep id " + id.value);
                    continue;
                }
                if (seen.insert(id).second) keep.push_back(id);
            }
            kappa = std::clamp(r["confidence"].get<double>(), 0.0, 100.0);
            voluntary = r.value("terminate", false);
            if (r.contains("tool_calls")) pending_tools_ = r["tool_calls"].get<std::vector<nlohmann::json>>();
            decision = {{"keep", nlohmann::ordered_json::array()}, {"confidence", kappa}, {"terminate", voluntary},
                        {"tool_calls", r.value("tool_calls", nlohmann::json::array())}};
            for (const auto& id : keep) decision["keep"].push_back(id.value);
        } catch (const Error& e) {
            if (!recoverable(e)) throw;
            keep = out_.candidates.kept_ids();
            round["notes"].push_back(std::string("refinement fallback, keeping all: ") + e.what());
            decision = {{"fallback", true}, {"confidence", kappa}};
        }
        round["decision"] = decision;

        std::set<UnitId> keep_set(keep.begin(), keep.end());
        for (auto& c : out_.candidates.all())
            if (c.kept && !keep_set.count(c.unit)) c.kept = false;

        std::vector<UnitId> fresh;
        for (const auto& id : keep)
            if (!committed_.count(id)) fresh.push_back(id);
        auto covered = [&](const UnitId& id) {
            for (const auto& other : keep)
                if (other != id && env_.model.is_ancestor(other, id)) return true;
            for (const auto& other : committed_)
                if (env_.model.is_ancestor(other, id)) return true;
            return false;
        };
        int cost = 0;
        for (const auto& id : fresh)
            if (!covered(id)) cost += env_.model.at(id).line_count;

        auto policy = tracker_->observe(kappa, cost);
        round["projected_cost"] = cost;
        round["policy"] = policy.describe();
        if (policy.reason != TerminalReason::Exhaustion) committed_.insert(fresh.begin(), fresh.end());

        if (fast_path_) {
            out_.terminal_reason = policy.kind == PolicyDecision::Kind::Terminate ? *policy.reason
                                                                                    : TerminalReason::FastPathComplete;
            return true;
        }
        if (policy.kind == PolicyDecision::Kind::Terminate) {
            out_.terminal_reason = *policy.reason;
            return true;
        }
        if (voluntary) {
            out_.terminal_reason = TerminalReason::Voluntary;
            return true;
        }
        return false;
    }

    const std::string& query_;
    const ScoutEnv& env_;
    Reasoner& reasoner_;
    ScoutResult& out_;
    std::optional<PolicyTracker> tracker_;
    nlohmann::ordered_json rounds_ = nlohmann::ordered_json::array();
    std::vector<nlohmann::json> pending_tools_;
    std::vector<std::string> tool_summaries_;
    std::set<UnitId> committed_;
    bool fast_path_ = false;
};

void Session::run() {
    const auto& model = env_.model;
    nlohmann::ordered_json& trace = out_.trace;
    trace["version"] = kTraceVersion;
    trace["query"] = query_;
    trace["snapshot_hash"] = to_hex(model.snapshot().snapshot_hash);
    trace["config"] = to_json(env_.budget);

    nlohmann::ordered_json pre;
    ComplexityEstimate est;
    if (!model.units().empty()) {
        est = estimate_complexity(query_, reasoner_);
    } else {
        est.note = "empty repository";
    }
    double h_r = repo_entropy(compute_repo_stats(model.snapshot(), model.units()));
    tracker_.emplace(env_.budget, est.d_q, h_r);
    auto pre_decision = tracker_->pre_assess(est.kappa0);
    fast_path_ = pre_decision.kind == PolicyDecision::Kind::FastPath;
    pre["complexity"] = tracker_->state().d_q;
    pre["kappa0"] = tracker_->state().kappa;
    pre["entropy"] = h_r;
    pre["budget"] = tracker_->state().budget;
    pre["decision"] = pre_decision.describe();
    if (est.note) pre["note"] = *est.note;
    trace["pre_assessment"] = pre;
    trace["augmentation"] = nullptr;

    int t = tracker_->begin_round();
    auto round = new_round(t);
    if (model.units().empty()) {
        round["notes"].push_back("empty repository");
        finish_round(round);
        out_.terminal_reason = TerminalReason::ExhaustionDegenerate;
    } else {
        if (fast_path_) {
            retrieval(tokenize_code(query_), query_, t, round);
        } else {
            std::vector<std::string> notes;
            ++out_.augmentation_requests;
            auto aq = augment_query(query_, reasoner_, notes);
            for (auto& n : notes) round["notes"].push_back(n);
            trace["augmentation"] = {{"intent", to_string(aq.intent)},
                                     {"rewritten", aq.rewritten},
                                     {"keywords", aq.keywords},
                                     {"pseudocode_hints", aq.pseudocode_hints ? nlohmann::ordered_json(*aq.pseudocode_hints)
                                                                              : nlohmann::ordered_json(nullptr)},
                                     {"degenerate", aq.degenerate}};

            ReasonerRequest init;
            init.role = Role::InitDecision;
            init.payload["query"] = query_;
            init.payload["intent"] = std::string(to_string(aq.intent));
            init.payload["keywords"] = fmt::format("{}", fmt::join(aq.keywords, ", "));
            std::vector<nlohmann::json> calls;
            try {
                auto r = reasoner_.request(init);
                calls = r["tool_calls"].get<std::vector<nlohmann::json>>();
                round["decision"] = {{"tool_calls", r["tool_calls"]}};
            } catch (const Error& e) {
                if (!recoverable(e)) throw;
                round["notes"].push_back(std::string("init decision fallback, no tool calls: ") + e.what());
            }
            run_tools(calls, t, round);
            std::string dense_text = aq.rewritten;
            if (aq.pseudocode_hints) dense_text += "\n" + *aq.pseudocode_hints;
            retrieval(keyword_terms(aq.keywords), dense_text, t, round);
        }
        expand(t, round);
        cap_working_set(round);
        bool empty = out_.candidates.kept_count() == 0;
        finish_round(round);
        if (empty) {
            out_.terminal_reason = TerminalReason::ExhaustionDegenerate;
        } else {
            while (true) {
                t = tracker_->begin_round();
                round = new_round(t);
                bool done = refine(t, round);
                if (!done) {
                    run_tools(pending_tools_, t, round);
                    expand(t, round);
                    cap_working_set(round);
                }
                finish_round(round);
                if (done) break;
            }
        }
    }

    trace["rounds"] = rounds_;
    trace["terminal_reason"] = std::string(to_string(out_.terminal_reason));
    nlohmann::ordered_json ws = nlohmann::ordered_json::array();
    for (const auto& c : out_.candidates.all()) {
        if (!c.kept) continue;
        ws.push_back({{"unit", c.unit.value}, {"provenance", to_json(c.provenance)}, {"first_seen_round", c.first_seen_round}});
    }
    trace["working_set"] = ws;
    trace["counts"] = {{"tool_calls", out_.tool_calls}, {"augmentation_requests", out_.augmentation_requests}};
    out_.state = tracker_->state();
}

}  // namespace

std::string_view to_string(Intent intent) {
    switch (intent) {
        case Intent::ConceptLookup: return "concept_lookup";
        case Intent::SymbolLookup: return "symbol_lookup";
        case Intent::BehaviorTrace: return "behavior_trace";
        case Intent::BugLocalization: return "bug_localization";
        case Intent::Architecture: return "architecture";
        case Intent::TaskExecution: return "task_execution";
    }
    return "concept_lookup";
}

std::optional<Intent> parse_intent(std::string_view text) {
    for (auto i : kIntents)
        if (to_string(i) == text) return i;
    return std::nullopt;
}

AugmentedQuery degenerate_augmentation(const std::string& query) {
    AugmentedQuery aq;
    aq.original = query;
    aq.intent = Intent::ConceptLookup;
    aq.rewritten = query;
    aq.keywords = tokenize_code(query);
    aq.degenerate = true;
    return aq;
}

AugmentedQuery augment_query(const std::string& query, Reasoner& reasoner, std::vector<std::string>& notes) {
    ReasonerRequest req;
    req.role = Role::Augment;
    req.payload["query"] = query;
    try {
        auto r = reasoner.request(req);
        AugmentedQuery aq;
        aq.original = query;
        aq.intent = *parse_intent(r["intent"].get<std::string>());
        aq.rewritten = r["rewritten"].get<std::string>();
        aq.keywords = r["keywords"].get<std::vector<std::string>>();
        if (r.contains("pseudocode_hints") && r["pseudocode_hints"].is_string())
            aq.pseudocode_hints = r["pseudocode_hints"].get<std::string>();
        return aq;
    } catch (const Error& e) {
        if (!recoverable(e)) throw;
        notes.push_back(std::string("degenerate augmentation: ") + e.what());
        return degenerate_augmentation(query);
    }
}

std::vector<std::string> keyword_terms(const std::vector<std::string>& keywords) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& k : keywords)
        for (auto& t : tokenize_code(k))
            if (seen.insert(t).second) out.push_back(std::move(t));
    return out;
}

bool CandidateSet::merge(const UnitId& unit, const Provenance& p, int round) {
    if (auto* c = find(unit)) {
        auto& q = c->provenance;
        if (p.retrieval) q.retrieval = std::max(q.retrieval.value_or(0.0), *p.retrieval);
        if (p.tool_matches) q.tool_matches = q.tool_matches.value_or(0) + *p.tool_matches;
        if (p.graph_path && !q.graph_path) q.graph_path = p.graph_path;
        return false;
    }
    Candidate c;
    c.unit = unit;
    c.provenance = p;
    c.first_seen_round = round;
    items_.push_back(std::move(c));
    return true;
}

const Candidate* CandidateSet::find(const UnitId& unit) const {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const Candidate& c) { return c.unit == unit; });
    return it == items_.end() ? nullptr : &*it;
}

Candidate* CandidateSet::find(const UnitId& unit) {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const Candidate& c) { return c.unit == unit; });
    return it == items_.end() ? nullptr : &*it;
}

std::vector<UnitId> CandidateSet::kept_ids() const {
    std::vector<UnitId> out;
    for (const auto& c : items_)
        if (c.kept) out.push_back(c.unit);
    return out;
}

std::size_t CandidateSet::kept_count() const {
    return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const Candidate& c) { return c.kept; }));
}

std::vector<ExpansionAddition> expand_candidates(CandidateSet& candidates, const RelationGraph& graph, int round,
                                                 std::size_t cap) {
    auto seeds = candidates.kept_ids();
    std::vector<ExpansionAddition> added;
    if (seeds.empty()) return added;
    auto hits = graph.neighbors(seeds, {Layer::Dependency, Layer::Inheritance, Layer::Call}, 1, Direction::Both);
    for (const auto& hit : hits) {
        Provenance p;
        p.graph_path = render_relation_path(hit.path);
        if (candidates.find(hit.unit)) {
            candidates.merge(hit.unit, p, round);
            continue;
        }
        if (added.size() >= cap) continue;
        candidates.merge(hit.unit, p, round);
        added.push_back({hit.unit, *p.graph_path});
    }
    return added;
}

std::vector<PrioritizedUnit> ScoutResult::prioritized(const BudgetConfig& cfg, const RepoModel& model) const {
    std::vector<PrioritizedUnit> out;
    for (const auto& c : candidates.all()) {
        if (!c.kept) continue;
        out.push_back(priority_score(c.unit, c.provenance.retrieval.value_or(0.0), c.provenance.tool_matches.has_value(),
                                     model.at(c.unit).line_count, cfg));
    }
    sort_by_priority(out);
    return out;
}

ScoutResult run_scout(const std::string& query, const ScoutEnv& env, Reasoner& reasoner) {
    ScoutResult out;
    Session(query, env, reasoner, out).run();
    return out;
}

nlohmann::ordered_json to_json(const NavState& s) {
    return {{"D_q", s.d_q}, {"H_r", s.h_r}, {"L_t", s.l_t}, {"t", s.t}, {"kappa", s.kappa}, {"B", s.budget}};
}

nlohmann::ordered_json to_json(const BudgetConfig& c) {
    return {{"c", c.c},           {"B_min", c.b_min},       {"tau", c.tau}, {"epsilon", c.epsilon},
            {"patience", c.patience}, {"T", c.horizon},     {"w1", c.w1},   {"w2", c.w2},
            {"w3", c.w3},         {"k", c.k}};
}

}  // namespace reponav
