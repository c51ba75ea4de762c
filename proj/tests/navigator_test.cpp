#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <regex>

#include <fmt/format.h>

#include "reponav/error.hpp"
#include "reponav/navigator.hpp"
#include "support.hpp"

using namespace reponav;
using namespace reponav::testing;
using nlohmann::json;

namespace {

/// Candidate ids listed in a refinement prompt, in order.
std::vector<std::string> listed_candidates(const std::string& prompt) {
    static const std::regex line(R"(^- (\S+) \[)", std::regex::multiline);
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), line); it != std::sregex_iterator(); ++it)
        out.push_back((*it)[1]);
    return out;
}

/// Backend answering through a callback; a null json means "unavailable".
class CallbackBackend final : public ReasonerBackend {
public:
    using Fn = std::function<json(Role, const std::string&)>;
    explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string model_id() const override { return "callback"; }
    Completion complete(Role role, const std::string& prompt) override {
        json r = fn_(role, prompt);
        if (r.is_null()) throw Error(ErrorCode::ReasonerUnavailable, "down");
        return {r.is_string() ? r.get<std::string>() : r.dump(), std::nullopt, std::nullopt};
    }

private:
    Fn fn_;
};

json augment(const std::vector<std::string>& keywords) {
    return {{"intent", "behavior_trace"}, {"rewritten", "how data is loaded"}, {"keywords", keywords}};
}

ScoutEnv env_for(const Fixture& f) { return ScoutEnv{f.model, f.index, f.graph, nullptr, BudgetConfig{}, ToolLimits{}, 50}; }

struct Run {
    ScoutResult result;
    std::vector<std::string> prompts;
    std::size_t ledger_records = 0;
};

Run scout(const std::string& query, ReasonerBackend& backend, const ScoutEnv& env) {
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    Run run{run_scout(query, env, r), r.prompts(), 0};
    run.ledger_records = ledger.size();
    return run;
}

}  // namespace

TEST(Intent, ParseRoundTrip) {
    for (auto name : {"concept_lookup", "symbol_lookup", "behavior_trace", "bug_localization", "architecture",
                      "task_execution"})
        EXPECT_EQ(to_string(*parse_intent(name)), name);
    EXPECT_FALSE(parse_intent("debugging"));
}

TEST(Augmentation, DegenerateKeepsQuery) {
    auto aq = degenerate_augmentation("Where is loadConfig?");
    EXPECT_TRUE(aq.degenerate);
    EXPECT_EQ(aq.rewritten, "Where is loadConfig?");
    EXPECT_EQ(aq.intent, Intent::ConceptLookup);
    EXPECT_FALSE(aq.keywords.empty());
}

TEST(Augmentation, MalformedTwiceFallsBack) {
    ScriptedBackend backend({{Role::Augment, {"nope", json{{"intent", "unknown"}}}}}, true);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    std::vector<std::string> notes;
    auto aq = augment_query("retry backoff", r, notes);
    EXPECT_TRUE(aq.degenerate);
    EXPECT_EQ(notes.size(), 1u);
    EXPECT_EQ(ledger.size(), 2u);
}

TEST(Augmentation, KeywordTermsDeduplicate) {
    auto terms = keyword_terms({"load_config", "config", "Loader.load"});
    std::set<std::string> unique(terms.begin(), terms.end());
    EXPECT_EQ(unique.size(), terms.size());
    EXPECT_TRUE(unique.count("config"));
    EXPECT_TRUE(unique.count("load"));
}

TEST(CandidateSetTest, MergeKeepsUniqueIds) {
    CandidateSet set;
    Provenance a;
    a.retrieval = 0.4;
    Provenance b;
    b.retrieval = 0.7;
    b.tool_matches = 2;
    EXPECT_TRUE(set.merge(UnitId("x"), a, 1));
    EXPECT_FALSE(set.merge(UnitId("x"), b, 2));
    EXPECT_FALSE(set.merge(UnitId("x"), b, 3));
    ASSERT_EQ(set.all().size(), 1u);
    EXPECT_DOUBLE_EQ(*set.find(UnitId("x"))->provenance.retrieval, 0.7);
    EXPECT_EQ(*set.find(UnitId("x"))->provenance.tool_matches, 4u);
    EXPECT_EQ(set.find(UnitId("x"))->first_seen_round, 1);
}

TEST(Expansion, OneHopCappedAndDeduplicated) {
    const auto& f = sample();
    CandidateSet set;
    set.merge(UnitId("pipeline/runner.py::Runner.run"), Provenance{}, 1);
    auto all = expand_candidates(set, f.graph, 1, 100);
    EXPECT_FALSE(all.empty());
    std::set<UnitId> ids;
    for (const auto& a : all) {
        EXPECT_TRUE(ids.insert(a.unit).second);
        EXPECT_NE(a.unit.value, "pipeline/runner.py::Runner.run");
        EXPECT_FALSE(a.via.empty());
    }
    EXPECT_TRUE(ids.count(UnitId("data/loader.py::Loader.load")));

    CandidateSet capped;
    capped.merge(UnitId("pipeline/runner.py::Runner.run"), Provenance{}, 1);
    auto two = expand_candidates(capped, f.graph, 1, 2);
    EXPECT_EQ(two.size(), std::min<std::size_t>(2, all.size()));
    EXPECT_EQ(capped.all().size(), 1 + two.size());

    auto again = expand_candidates(set, f.graph, 2, 0);
    EXPECT_TRUE(again.empty());
}

TEST(Scout, FastPathTwoRoundsNoToolsNoAugmentation) {
    const auto& f = sample();
    CallbackBackend backend([](Role role, const std::string& prompt) -> json {
        if (role == Role::Complexity) return {{"complexity", 20}, {"confidence", 95}};
        if (role == Role::RefineDecision) {
            auto ids = listed_candidates(prompt);
            ids.resize(std::min<std::size_t>(ids.size(), 2));
            return {{"keep", ids},
                    {"confidence", 96},
                    {"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "def"}}}}}}};
        }
        ADD_FAILURE() << "unexpected role " << to_string(role);
        return nullptr;
    });
    auto run = scout("where is the data loader", backend, env_for(f));
    const auto& trace = run.result.trace;
    EXPECT_EQ(trace["rounds"].size(), 2u);
    EXPECT_EQ(run.result.tool_calls, 0);
    EXPECT_EQ(run.result.augmentation_requests, 0);
    EXPECT_EQ(trace["counts"]["tool_calls"], 0);
    EXPECT_TRUE(trace["augmentation"].is_null());
    EXPECT_EQ(trace["pre_assessment"]["decision"], "FastPath");
    for (const auto& r : trace["rounds"]) EXPECT_TRUE(r["tool_calls"].empty());
    EXPECT_EQ(run.result.candidates.kept_count(), 2u);
}

TEST(Scout, EmptyRepositoryIsDegenerateExhaustion) {
    TempDir dir;
    PythonGrammar grammar;
    auto model = build_repo_model(dir.path(), {}, grammar);
    auto graph = build_relation_graph(model);
    auto index = build_hybrid_index(model, nullptr);
    ScoutEnv env{model, index, graph, nullptr, BudgetConfig{}, ToolLimits{}, 50};
    ScriptedBackend backend({}, true);
    auto run = scout("anything", backend, env);
    EXPECT_EQ(run.result.terminal_reason, TerminalReason::ExhaustionDegenerate);
    EXPECT_EQ(run.result.trace["terminal_reason"], "Exhaustion-degenerate");
    EXPECT_EQ(run.result.candidates.kept_count(), 0u);
    EXPECT_EQ(run.ledger_records, 0u);
}

TEST(Scout, UnavailableReasonerDegradesGracefully) {
    const auto& f = sample();
    NullBackend backend;
    auto run = scout("load config file", backend, env_for(f));
    const auto& trace = run.result.trace;
    EXPECT_EQ(trace["pre_assessment"]["complexity"], 50.0);
    EXPECT_TRUE(trace["augmentation"]["degenerate"].get<bool>());
    EXPECT_LE(static_cast<int>(trace["rounds"].size()), BudgetConfig{}.horizon);
    EXPECT_GT(run.result.candidates.kept_count(), 0u);
}

TEST(Scout, UnknownKeepIdDroppedWithNote) {
    const auto& f = sample();
    CallbackBackend backend([](Role role, const std::string& prompt) -> json {
        switch (role) {
            case Role::Complexity: return {{"complexity", 40}, {"confidence", 10}};
            case Role::Augment: return augment({"loader", "load"});
            case Role::InitDecision: return {{"tool_calls", json::array()}};
            case Role::RefineDecision: {
                auto ids = listed_candidates(prompt);
                return {{"keep", {ids.at(0), "nowhere.py::ghost"}}, {"confidence", 95}};
            }
            default: return nullptr;
        }
    });
    auto run = scout("how is data loaded", backend, env_for(f));
    const auto& last = run.result.trace["rounds"].back();
    bool noted = false;
    for (const auto& n : last["notes"]) noted = noted || n.get<std::string>().find("nowhere.py::ghost") != std::string::npos;
    EXPECT_TRUE(noted);
    EXPECT_EQ(run.result.candidates.kept_count(), 1u);
    EXPECT_EQ(run.result.terminal_reason, TerminalReason::Sufficiency);
}

TEST(Scout, KeepThreeOfSevenAtHighConfidence) {
    const auto& f = sample();
    std::vector<std::string> offered, kept;
    int refinements = 0;
    CallbackBackend backend([&](Role role, const std::string& prompt) -> json {
        switch (role) {
            case Role::Complexity: return {{"complexity", 40}, {"confidence", 10}};
            case Role::Augment: return augment({"loader"});
            case Role::InitDecision: return {{"tool_calls", json::array()}};
            case Role::RefineDecision: {
                if (refinements++ == 0) {
                    offered = listed_candidates(prompt);
                    kept = {offered.begin(), offered.begin() + std::min<std::size_t>(3, offered.size())};
                }
                return {{"keep", kept}, {"confidence", 85}};
            }
            default: return nullptr;
        }
    });
    ScoutEnv env = env_for(f);
    env.working_set_cap = 7;
    env.budget.tau = 85;
    auto run = scout("loader", backend, env);
    ASSERT_EQ(offered.size(), 7u);
    EXPECT_EQ(refinements, 1);
    EXPECT_EQ(run.result.terminal_reason, TerminalReason::Sufficiency);
    EXPECT_EQ(run.result.candidates.kept_ids(), (std::vector<UnitId>{UnitId(kept[0]), UnitId(kept[1]), UnitId(kept[2])}));
    EXPECT_EQ(run.result.trace["working_set"].size(), 3u);
}

TEST(Scout, StagnatingConfidenceStopsOnInefficiency) {
    // A call chain stage0 -> stage1 -> ... where every stage is a 300-line function in its own file,
    // so each refinement that keeps the newly expanded stage grows L by about 300 lines.
    TempDir dir;
    std::vector<std::pair<std::string, std::string>> files;
    for (int i = 0; i < 10; ++i) {
        std::string text;
        if (i + 1 < 10) text += fmt::format("from stage{} import stage{}\n\n", i + 1, i + 1);
        text += fmt::format("def stage{}(x):\n", i);
        for (int n = 0; n < 298; ++n) text += fmt::format("    x = x + {}\n", n);
        text += i + 1 < 10 ? fmt::format("    return stage{}(x)\n", i + 1) : std::string("    return x\n");
        files.emplace_back(fmt::format("stage{}.py", i), text);
    }
    auto model = model_from_files(dir.path(), files);
    auto graph = build_relation_graph(model);
    auto index = build_hybrid_index(model, nullptr);
    ScoutEnv env{model, index, graph, nullptr, BudgetConfig{}, ToolLimits{}, 50};

    static const std::regex function_line(R"(^- (\S+) \[Function)", std::regex::multiline);
    std::vector<double> kappas = {55, 57, 58};
    std::size_t next = 0;
    CallbackBackend backend([&](Role role, const std::string& prompt) -> json {
        switch (role) {
            case Role::Complexity: return {{"complexity", 100}, {"confidence", 20}};
            case Role::Augment: return augment({"stage0"});
            case Role::InitDecision: return {{"tool_calls", json::array()}};
            case Role::RefineDecision: {
                json keep = json::array();
                for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), function_line);
                     it != std::sregex_iterator(); ++it)
                    keep.push_back((*it)[1].str());
                return {{"keep", keep}, {"confidence", kappas.at(std::min(next++, kappas.size() - 1))}};
            }
            default: return nullptr;
        }
    });
    auto run = scout("what does stage0 do", backend, env);
    const auto& rounds = run.result.trace["rounds"];
    ASSERT_EQ(rounds.size(), 4u);
    EXPECT_EQ(run.result.terminal_reason, TerminalReason::Inefficiency);
    EXPECT_EQ(run.result.trace["terminal_reason"], "Inefficiency");

    // IGR by hand from the committed volumes: (57-55)/dL3 and (58-57)/dL4, both below epsilon.
    int l2 = rounds[1]["state"]["L_t"], l3 = rounds[2]["state"]["L_t"], l4 = rounds[3]["state"]["L_t"];
    EXPECT_EQ(l3 - l2, 300);
    EXPECT_EQ(l4 - l3, 300);
    EXPECT_DOUBLE_EQ(rounds[2]["igr"].get<double>(), 2.0 / 300.0);
    EXPECT_DOUBLE_EQ(rounds[3]["igr"].get<double>(), 1.0 / 300.0);
    EXPECT_LT(rounds[2]["igr"].get<double>(), env.budget.epsilon);
}

TEST(Scout, VoluntaryTermination) {
    const auto& f = sample();
    CallbackBackend backend([&](Role role, const std::string& prompt) -> json {
        switch (role) {
            case Role::Complexity: return {{"complexity", 60}, {"confidence", 20}};
            case Role::Augment: return augment({"auth", "token"});
            case Role::InitDecision: return {{"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "Token"}}}}}}};
            case Role::RefineDecision: return {{"keep", listed_candidates(prompt)}, {"confidence", 70}, {"terminate", true}};
            default: return nullptr;
        }
    });
    auto run = scout("token auth", backend, env_for(f));
    EXPECT_EQ(run.result.terminal_reason, TerminalReason::Voluntary);
    EXPECT_EQ(run.result.tool_calls, 1);
    EXPECT_EQ(run.result.trace["rounds"].size(), 2u);
}

TEST(Scout, AdversarialReasonerNeverExceedsHorizon) {
    const auto& f = sample();
    for (int seed = 0; seed < 40; ++seed) {
        std::mt19937 rng(seed);
        CallbackBackend backend([&](Role role, const std::string& prompt) -> json {
            switch (role) {
                case Role::Complexity: return {{"complexity", rng() % 101}, {"confidence", rng() % 80}};
                case Role::Augment:
                    return rng() % 4 == 0 ? json("garbage") : augment({"run", "load", "retry"});
                case Role::InitDecision:
                    return {{"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "def"}}}},
                                            {{"tool", "traverse"}, {"args", {{"path", "."}, {"max_depth", 3}}}}}}};
                case Role::RefineDecision: {
                    if (rng() % 5 == 0) return json("{broken");
                    json keep = json::array();
                    for (auto& id : listed_candidates(prompt))
                        if (rng() % 3) keep.push_back(id);
                    keep.push_back("made/up.py::x");
                    // Small steady gains stay above epsilon so neither patience nor sufficiency fires early.
                    return {{"keep", keep},
                            {"confidence", static_cast<double>(rng() % 90)},
                            {"terminate", false},
                            {"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "(?i)self"}}}}}}};
                }
                default: return nullptr;
            }
        });
        ScoutEnv env = env_for(f);
        env.budget.horizon = 2 + seed % 6;
        auto run = scout("trace every call", backend, env);
        EXPECT_LE(static_cast<int>(run.result.trace["rounds"].size()), env.budget.horizon) << "seed " << seed;
        EXPECT_LE(run.result.state.t, env.budget.horizon);
        EXPECT_LE(run.result.candidates.kept_count(), env.working_set_cap);
    }
}

TEST(Scout, TraceIsDeterministic) {
    const auto& f = sample();
    auto make = [] {
        return std::make_unique<CallbackBackend>([](Role role, const std::string& prompt) -> json {
            switch (role) {
                case Role::Complexity: return {{"complexity", 50}, {"confidence", 30}};
                case Role::Augment: return augment({"backoff", "retry"});
                case Role::InitDecision: return {{"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "retry"}}}}}}};
                case Role::RefineDecision: {
                    auto ids = listed_candidates(prompt);
                    ids.resize(std::min<std::size_t>(ids.size(), 4));
                    return {{"keep", ids}, {"confidence", 92}};
                }
                default: return nullptr;
            }
        });
    };
    auto a = make();
    auto b = make();
    auto ra = scout("where are retries handled", *a, env_for(f));
    auto rb = scout("where are retries handled", *b, env_for(f));
    EXPECT_EQ(ra.result.trace.dump(), rb.result.trace.dump());
    EXPECT_EQ(ra.prompts, rb.prompts);
}

TEST(Scout, ScoutingNeverShowsBodyInteriors) {
    const auto& f = sample();
    auto interior = interior_texts(f.model);
    ASSERT_GT(interior.size(), 50u);
    CallbackBackend backend([](Role role, const std::string& prompt) -> json {
        switch (role) {
            case Role::Complexity: return {{"complexity", 80}, {"confidence", 10}};
            case Role::Augment: return augment({"self", "return", "raise"});
            case Role::InitDecision:
                return {{"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "return|raise|self\\."}}}},
                                        {{"tool", "traverse"}, {"args", {{"path", "."}, {"max_depth", 4}}}}}}};
            case Role::RefineDecision:
                return {{"keep", listed_candidates(prompt)},
                        {"confidence", 40},
                        {"tool_calls", {{{"tool", "search"}, {"args", {{"pattern", "(?i)error"}}}}}}};
            default: return nullptr;
        }
    });
    auto run = scout("explain every function body", backend, env_for(f));
    ASSERT_GT(run.result.tool_calls, 0);
    for (const auto& out : run.result.tool_outputs) EXPECT_FALSE(leaked_line(interior, out)) << *leaked_line(interior, out);
    for (const auto& p : run.prompts) EXPECT_FALSE(leaked_line(interior, p)) << *leaked_line(interior, p);
    EXPECT_FALSE(leaked_line(interior, run.result.trace.dump()));
}
