#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "reponav/error.hpp"
#include "reponav/reasoner.hpp"

using namespace reponav;
using nlohmann::json;

namespace {

ReasonerRequest req(Role role, json payload = json::object()) {
    ReasonerRequest r;
    r.role = role;
    for (auto& [k, v] : payload.items()) r.payload[k] = v;
    return r;
}

json augment_ok() {
    return {{"intent", "bug_localization"}, {"rewritten", "find the retry loop"}, {"keywords", {"retry", "backoff"}}};
}

}  // namespace

TEST(Validation, PerRoleSchemas) {
    EXPECT_FALSE(validate_response(Role::Augment, augment_ok()));
    auto bad = augment_ok();
    bad["intent"] = "Gardening";
    EXPECT_TRUE(validate_response(Role::Augment, bad));
    bad = augment_ok();
    bad["keywords"] = json::array();
    EXPECT_TRUE(validate_response(Role::Augment, bad));

    EXPECT_FALSE(validate_response(Role::Complexity, {{"complexity", 40}}));
    EXPECT_TRUE(validate_response(Role::Complexity, {{"complexity", "high"}}));

    EXPECT_FALSE(validate_response(Role::InitDecision, {{"tool_calls", json::array()}}));
    json four = json::array();
    for (int i = 0; i < 4; ++i) four.push_back({{"tool", "search"}, {"args", {{"pattern", "x"}}}});
    EXPECT_TRUE(validate_response(Role::InitDecision, {{"tool_calls", four}}));
    EXPECT_TRUE(validate_response(Role::InitDecision, {{"tool_calls", {{{"tool", "rm"}}}}}));

    EXPECT_FALSE(validate_response(Role::RefineDecision, {{"keep", {"a"}}, {"confidence", 70}}));
    EXPECT_TRUE(validate_response(Role::RefineDecision, {{"keep", {1}}, {"confidence", 70}}));
    EXPECT_TRUE(validate_response(Role::RefineDecision, {{"keep", json::array()}}));

    EXPECT_FALSE(validate_response(Role::Answer, "text"));
    EXPECT_TRUE(validate_response(Role::Answer, ""));
}

TEST(Scripted, PassThroughAndLedger) {
    ScriptedBackend backend({{Role::Complexity, {json{{"complexity", 85}}}}}, true);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    auto out = r.request(req(Role::Complexity, {{"query", "where is retry"}}));
    EXPECT_EQ(out["complexity"], 85);
    ASSERT_EQ(ledger.size(), 1u);
    auto rec = ledger.records()[0];
    EXPECT_TRUE(rec.ok);
    EXPECT_EQ(rec.model_id, "scripted");
    EXPECT_EQ(rec.prompt_tokens, synthetic_tokens(r.prompts()[0]));
    EXPECT_EQ(rec.completion_tokens, synthetic_tokens(json{{"complexity", 85}}.dump()));
}

TEST(Scripted, StrictExhaustionRaises) {
    ScriptedBackend backend({{Role::Complexity, {json{{"complexity", 1}}}}}, true);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    r.request(req(Role::Complexity));
    try {
        r.request(req(Role::Complexity));
        FAIL() << "expected ScriptExhausted";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ScriptExhausted);
    }
    EXPECT_THROW(r.request(req(Role::Answer)), Error);
}

TEST(Scripted, LenientRepeatsLastEntry) {
    ScriptedBackend backend({{Role::Complexity, {json{{"complexity", 1}}, json{{"complexity", 2}}}}}, false);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    EXPECT_EQ(r.request(req(Role::Complexity))["complexity"], 1);
    EXPECT_EQ(r.request(req(Role::Complexity))["complexity"], 2);
    EXPECT_EQ(r.request(req(Role::Complexity))["complexity"], 2);
}

TEST(Scripted, ReplayIsReferentiallyTransparent) {
    json script = json::parse(R"({
        "strict": true,
        "responses": {
            "augment": [{"intent": "bug_localization", "rewritten": "find the retry loop", "keywords": ["retry"]}],
            "complexity": [{"complexity": 30, "confidence": 20}],
            "answer": ["the loop lives in net/backoff.py"]
        }
    })");
    auto run = [&] {
        auto backend = ScriptedBackend::from_json(script);
        TokenLedger ledger;
        Reasoner r(*backend, ledger);
        std::vector<json> outs;
        outs.push_back(r.request(req(Role::Complexity, {{"query", "q"}})));
        outs.push_back(r.request(req(Role::Augment, {{"query", "q"}})));
        outs.push_back(r.request(req(Role::Answer, {{"query", "q"}})));
        return std::make_pair(outs, r.prompts());
    };
    auto a = run();
    auto b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Scripted, MalformedTwiceRaisesAndBooksBoth) {
    ScriptedBackend backend({{Role::Augment, {"not json", json{{"intent", "Nope"}}}}}, true);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    try {
        r.request(req(Role::Augment));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedAfterRetry);
    }
    ASSERT_EQ(ledger.size(), 2u);
    EXPECT_FALSE(ledger.records()[0].ok);
    EXPECT_FALSE(ledger.records()[1].ok);
}

TEST(Scripted, MalformedThenValidSucceeds) {
    ScriptedBackend backend({{Role::Augment, {"{", augment_ok()}}}, true);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    EXPECT_EQ(r.request(req(Role::Augment))["intent"], "bug_localization");
    EXPECT_EQ(ledger.size(), 2u);
}

TEST(Prompt, RoleInstructionAndPayload) {
    auto p = render_prompt(req(Role::Complexity, {{"query", "where is retry"}}));
    EXPECT_NE(p.find("where is retry"), std::string::npos);
    EXPECT_NE(render_prompt(req(Role::Answer)), p);
    EXPECT_EQ(synthetic_tokens(""), 0u);
    EXPECT_EQ(synthetic_tokens("abcde"), 2u);
}

TEST(Ledger, CostArithmetic) {
    std::vector<LedgerRecord> recs = {{Role::Answer, "gemini-3-flash", 1000000, 0, true, ""}};
    auto s = ledger_report(recs, default_price_table());
    ASSERT_TRUE(s.cost_usd);
    EXPECT_NEAR(*s.cost_usd, 0.40, 1e-12);
    EXPECT_EQ(s.totals.calls, 1u);
}

TEST(Ledger, EmptyReportsZero) {
    auto s = ledger_report({}, default_price_table());
    EXPECT_EQ(s.totals.total(), 0u);
    EXPECT_EQ(s.totals.calls, 0u);
    ASSERT_TRUE(s.cost_usd);
    EXPECT_EQ(*s.cost_usd, 0.0);
    EXPECT_TRUE(s.per_role.empty());
}

TEST(Ledger, PerRoleSumsToTotalAndUnpricedModels) {
    std::vector<LedgerRecord> recs = {
        {Role::Answer, "qwen3-coder-30b", 120, 30, true, ""},
        {Role::Augment, "qwen3-coder-30b", 50, 10, true, ""},
        {Role::Augment, "qwen3-coder-30b", 55, 0, false, "timeout"},
        {Role::RefineDecision, "local", 200, 40, true, ""},
    };
    auto s = ledger_report(recs, default_price_table());
    std::size_t prompt = 0, completion = 0, calls = 0;
    for (auto& [role, t] : s.per_role) {
        prompt += t.prompt_tokens;
        completion += t.completion_tokens;
        calls += t.calls;
    }
    EXPECT_EQ(prompt, s.totals.prompt_tokens);
    EXPECT_EQ(completion, s.totals.completion_tokens);
    EXPECT_EQ(calls, 4u);
    EXPECT_FALSE(s.cost_usd);
    EXPECT_EQ(s.unpriced_models, (std::vector<std::string>{"local"}));
}

TEST(Ledger, ConcurrentAppends) {
    TokenLedger ledger;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 250; ++i) ledger.append({Role::Answer, "m", 1, 1, true, ""});
        });
    for (auto& th : threads) th.join();
    EXPECT_EQ(ledger.size(), 1000u);
}

TEST(HttpBackend, TimeoutThenSuccessGivesOneResponseTwoRecords) {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& res) {
        auto body = json::parse(rq.body);
        EXPECT_EQ(body["model"], "stub");
        EXPECT_EQ(body["response_format"]["type"], "json_object");
        if (hits++ == 0) std::this_thread::sleep_for(std::chrono::milliseconds(600));
        json reply = {{"choices", {{{"message", {{"content", json{{"complexity", 42}}.dump()}}}}}},
                      {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpReasonerConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "stub";
    cfg.timeout = std::chrono::milliseconds(200);
    HttpReasonerBackend backend(cfg);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    auto out = r.request(req(Role::Complexity, {{"query", "q"}}));
    server.stop();
    th.join();

    EXPECT_EQ(out["complexity"], 42);
    auto recs = ledger.records();
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_FALSE(recs[0].ok);
    EXPECT_TRUE(recs[1].ok);
    EXPECT_EQ(recs[1].prompt_tokens, 11u);
    EXPECT_EQ(recs[1].completion_tokens, 3u);
}

TEST(HttpBackend, UnreachableRaisesUnavailable) {
    HttpReasonerConfig cfg;
    cfg.url = "http://127.0.0.1:1/v1/chat/completions";
    cfg.timeout = std::chrono::milliseconds(200);
    HttpReasonerBackend backend(cfg);
    TokenLedger ledger;
    Reasoner r(backend, ledger);
    try {
        r.request(req(Role::Answer));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ReasonerUnavailable);
    }
    EXPECT_EQ(ledger.size(), 2u);
}
