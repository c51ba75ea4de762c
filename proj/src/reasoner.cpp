#include "reponav/reasoner.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "reponav/error.hpp"

namespace reponav {

namespace {

constexpr std::string_view kIntents[] = {"concept_lookup",   "symbol_lookup", "behavior_trace",
                                         "bug_localization", "architecture",  "task_execution"};

std::string_view instruction(Role role) {
    switch (role) {
        case Role::Augment:
            return "Classify the query intent as one of concept_lookup, symbol_lookup, behavior_trace, "
                   "bug_localization, architecture, task_execution. Rewrite the query for semantic search and "
                   "list code search keywords. Reply JSON {intent, rewritten, keywords, pseudocode_hints}.";
        case Role::InitDecision:
            return "Choose 0-3 exploratory tool calls: traverse {path, max_depth} or search {pattern, scope}. "
                   "Reply JSON {tool_calls: [{tool, args}]}.";
        case Role::Complexity:
            return "Rate the query difficulty 0-100 and your confidence 0-100 that plain retrieval suffices. "
                   "Reply JSON {complexity, confidence}.";
        case Role::RefineDecision:
            return "Keep only the units needed to answer. Reply JSON {keep: [unit ids], tool_calls: [...], "
                   "confidence: 0-100, terminate: bool}.";
        case Role::Answer: return "Answer the question using only the context below.";
    }
    return "";
}

std::optional<std::string> check_tool_calls(const nlohmann::json& r, const char* key) {
    if (!r.contains(key)) return std::nullopt;
    const auto& calls = r[key];
    if (!calls.is_array()) return std::string(key) + " must be an array";
    if (calls.size() > 3) return std::string("at most 3 ") + key;
    for (const auto& c : calls) {
        if (!c.is_object() || !c.contains("tool") || !c["tool"].is_string()) return "tool call needs a tool name";
        std::string tool = c["tool"];
        if (tool != "traverse" && tool != "search") return "unknown tool " + tool;
        if (c.contains("args") && !c["args"].is_object()) return "tool args must be an object";
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Augment: return "augment";
        case Role::InitDecision: return "init_decision";
        case Role::Complexity: return "complexity";
        case Role::RefineDecision: return "refine_decision";
        case Role::Answer: return "answer";
    }
    return "unknown";
}

std::optional<Role> parse_role(std::string_view text) {
    for (auto r : {Role::Augment, Role::InitDecision, Role::Complexity, Role::RefineDecision, Role::Answer})
        if (to_string(r) == text) return r;
    return std::nullopt;
}

std::string render_prompt(const ReasonerRequest& request) {
    std::string out(instruction(request.role));
    out += '\n';
    for (const auto& [key, value] : request.payload.items()) {
        out += "## " + key + "\n";
        out += value.is_string() ? value.get<std::string>() : value.dump();
        out += '\n';
    }
    return out;
}

std::optional<std::string> validate_response(Role role, const nlohmann::json& r) {
    auto is_number = [](const nlohmann::json& v) { return v.is_number(); };
    switch (role) {
        case Role::Answer:
            if (!r.is_string() || r.get<std::string>().empty()) return "answer must be non-empty text";
            return std::nullopt;
        case Role::Complexity:
            if (!r.is_object() || !r.contains("complexity") || !is_number(r["complexity"]))
                return "complexity must be a number";
            if (r.contains("confidence") && !is_number(r["confidence"])) return "confidence must be a number";
            return std::nullopt;
        case Role::Augment: {
            if (!r.is_object()) return "expected an object";
            if (!r.contains("intent") || !r["intent"].is_string()) return "intent missing";
            std::string intent = r["intent"];
            if (std::find(std::begin(kIntents), std::end(kIntents), intent) == std::end(kIntents))
                return "intent outside taxonomy: " + intent;
            if (!r.contains("rewritten") || !r["rewritten"].is_string()) return "rewritten missing";
            if (!r.contains("keywords") || !r["keywords"].is_array() || r["keywords"].empty())
                return "keywords must be a non-empty array";
            for (const auto& k : r["keywords"])
                if (!k.is_string()) return "keywords must be strings";
            if (r.contains("pseudocode_hints") && !r["pseudocode_hints"].is_null() && !r["pseudocode_hints"].is_string())
                return "pseudocode_hints must be text";
            return std::nullopt;
        }
        case Role::InitDecision:
            if (!r.is_object() || !r.contains("tool_calls")) return "tool_calls missing";
            return check_tool_calls(r, "tool_calls");
        case Role::RefineDecision:
            if (!r.is_object()) return "expected an object";
            if (!r.contains("keep") || !r["keep"].is_array()) return "keep must be an array";
            for (const auto& k : r["keep"])
                if (!k.is_string()) return "keep must hold unit ids";
            if (!r.contains("confidence") || !is_number(r["confidence"])) return "confidence must be a number";
            if (r.contains("terminate") && !r["terminate"].is_boolean()) return "terminate must be a boolean";
            return check_tool_calls(r, "tool_calls");
    }
    return "unknown role";
}

std::size_t synthetic_tokens(std::string_view text) { return (text.size() + 3) / 4; }

void TokenLedger::append(LedgerRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<LedgerRecord> TokenLedger::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t TokenLedger::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

void TokenLedger::clear() {
    std::lock_guard lock(mutex_);
    records_.clear();
}

PriceTable default_price_table() {
    return {
        {"gemini-3-flash", {0.40, 2.40}},     {"gemini-2.5-pro", {0.87, 7.00}},
        {"claude-3.5-sonnet", {2.60, 13.00}}, {"claude-3.7-sonnet", {2.60, 13.00}},
        {"qwen3-coder-30b", {0.07, 0.27}},
    };
}

CostSummary ledger_report(const std::vector<LedgerRecord>& records, const PriceTable& prices) {
    CostSummary s;
    double cost = 0.0;
    std::set<std::string> unpriced;
    for (const auto& r : records) {
        auto& role = s.per_role[r.role];
        role.prompt_tokens += r.prompt_tokens;
        role.completion_tokens += r.completion_tokens;
        role.calls += 1;
        s.totals.prompt_tokens += r.prompt_tokens;
        s.totals.completion_tokens += r.completion_tokens;
        s.totals.calls += 1;
        auto it = prices.find(r.model_id);
        if (it == prices.end()) {
            unpriced.insert(r.model_id);
            continue;
        }
        cost += static_cast<double>(r.prompt_tokens) * it->second.input_per_million / 1e6 +
                static_cast<double>(r.completion_tokens) * it->second.output_per_million / 1e6;
    }
    s.unpriced_models.assign(unpriced.begin(), unpriced.end());
    if (unpriced.empty()) s.cost_usd = cost;
    return s;
}

std::string CostSummary::render() const {
    std::string out = fmt::format("{:<16} {:>6} {:>10} {:>10}\n", "role", "calls", "prompt", "completion");
    for (const auto& [role, t] : per_role)
        out += fmt::format("{:<16} {:>6} {:>10} {:>10}\n", to_string(role), t.calls, t.prompt_tokens, t.completion_tokens);
    out += fmt::format("{:<16} {:>6} {:>10} {:>10}\n", "total", totals.calls, totals.prompt_tokens, totals.completion_tokens);
    if (cost_usd) {
        out += fmt::format("cost: ${:.6f}\n", *cost_usd);
    } else {
        out += fmt::format("cost: unavailable (no price for {})\n", fmt::join(unpriced_models, ", "));
    }
    return out;
}

nlohmann::ordered_json CostSummary::to_json() const {
    nlohmann::ordered_json roles = nlohmann::ordered_json::object();
    for (const auto& [role, t] : per_role)
        roles[std::string(to_string(role))] = {
            {"calls", t.calls}, {"prompt_tokens", t.prompt_tokens}, {"completion_tokens", t.completion_tokens}};
    nlohmann::ordered_json j;
    j["per_role"] = roles;
    j["totals"] = {{"calls", totals.calls},
                   {"prompt_tokens", totals.prompt_tokens},
                   {"completion_tokens", totals.completion_tokens}};
    j["cost_usd"] = cost_usd ? nlohmann::ordered_json(*cost_usd) : nlohmann::ordered_json(nullptr);
    if (!unpriced_models.empty()) j["unpriced_models"] = unpriced_models;
    return j;
}

ScriptedBackend::ScriptedBackend(std::map<Role, std::vector<nlohmann::json>> script, bool strict, std::string model)
    : script_(std::move(script)), strict_(strict), model_(std::move(model)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "script must be a JSON object");
    std::map<Role, std::vector<nlohmann::json>> script;
    const nlohmann::json responses = j.value("responses", nlohmann::json::object());
    for (const auto& [key, list] : responses.items()) {
        auto role = parse_role(key);
        if (!role) throw Error(ErrorCode::ConfigError, "unknown role in script: " + key);
        if (!list.is_array()) throw Error(ErrorCode::ConfigError, "script entries for " + key + " must be a list");
        script[*role] = list.get<std::vector<nlohmann::json>>();
    }
    return std::make_unique<ScriptedBackend>(std::move(script), j.value("strict", false),
                                             j.value("model", std::string("scripted")));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read script " + path);
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, "invalid script " + path + ": " + e.what());
    }
}

Completion ScriptedBackend::complete(Role role, const std::string&) {
    std::lock_guard lock(mutex_);
    auto it = script_.find(role);
    std::size_t index = cursor_[role]++;
    if (it == script_.end() || it->second.empty()) {
        if (strict_) throw Error(ErrorCode::ScriptExhausted, std::string(to_string(role)) + " is not scripted");
        throw Error(ErrorCode::ReasonerUnavailable, std::string("no scripted response for ") + std::string(to_string(role)));
    }
    if (index >= it->second.size()) {
        if (strict_) throw Error(ErrorCode::ScriptExhausted, fmt::format("{} #{}", to_string(role), index + 1));
        index = it->second.size() - 1;
    }
    const auto& entry = it->second[index];
    return Completion{entry.is_string() ? entry.get<std::string>() : entry.dump(), std::nullopt, std::nullopt};
}

void ScriptedBackend::reset() {
    std::lock_guard lock(mutex_);
    cursor_.clear();
}

Completion HttpReasonerBackend::complete(Role role, const std::string& prompt) {
    auto scheme = config_.url.find("://");
    auto slash = config_.url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    std::string origin = slash == std::string::npos ? config_.url : config_.url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : config_.url.substr(slash);

    httplib::Client client(origin);
    auto sec = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto usec = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    nlohmann::json body = {{"model", config_.model},
                           {"messages", {{{"role", "user"}, {"content", prompt}}}},
                           {"temperature", 0}};
    if (role != Role::Answer) body["response_format"] = {{"type", "json_object"}};

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::ReasonerUnavailable, httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::ReasonerUnavailable, "HTTP " + std::to_string(res->status));
    Completion c;
    try {
        auto j = nlohmann::json::parse(res->body);
        c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            const auto& u = j["usage"];
            if (u.contains("prompt_tokens")) c.prompt_tokens = u["prompt_tokens"].get<std::size_t>();
            if (u.contains("completion_tokens")) c.completion_tokens = u["completion_tokens"].get<std::size_t>();
        }
    } catch (const nlohmann::json::exception&) {
        c.text = res->body;
    }
    return c;
}

Completion NullBackend::complete(Role role, const std::string&) {
    throw Error(ErrorCode::ReasonerUnavailable, std::string("no reasoner configured for ") + std::string(to_string(role)));
}

std::unique_ptr<ReasonerBackend> reasoner_backend_from_env(std::chrono::milliseconds timeout) {
    const char* url = std::getenv("REASONER_URL");
    if (!url || !*url) return nullptr;
    HttpReasonerConfig cfg;
    cfg.url = url;
    if (const char* m = std::getenv("REASONER_MODEL")) cfg.model = m;
    if (const char* k = std::getenv("REASONER_API_KEY")) cfg.api_key = k;
    cfg.timeout = timeout;
    return std::make_unique<HttpReasonerBackend>(std::move(cfg));
}

nlohmann::json Reasoner::request(const ReasonerRequest& req) {
    std::string prompt = render_prompt(req);
    prompts_.push_back(prompt);
    std::string last_error;
    std::optional<Error> unavailable;
    for (int attempt = 0; attempt < std::max(1, max_attempts_); ++attempt) {
        LedgerRecord rec;
        rec.role = req.role;
        rec.model_id = backend_.model_id();
        rec.prompt_tokens = synthetic_tokens(prompt);
        Completion c;
        try {
            c = backend_.complete(req.role, prompt);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ScriptExhausted) throw;
            rec.ok = false;
            rec.note = e.what();
            ledger_.append(std::move(rec));
            unavailable = e;
            continue;
        }
        if (c.prompt_tokens) rec.prompt_tokens = *c.prompt_tokens;
        rec.completion_tokens = c.completion_tokens ? *c.completion_tokens : synthetic_tokens(c.text);

        nlohmann::json parsed;
        std::optional<std::string> problem;
        if (req.role == Role::Answer) {
            parsed = c.text;
        } else {
            try {
                parsed = nlohmann::json::parse(c.text);
            } catch (const nlohmann::json::exception&) {
                problem = "reply is not JSON";
            }
        }
        if (!problem) problem = validate_response(req.role, parsed);
        if (!problem) {
            ledger_.append(std::move(rec));
            return parsed;
        }
        rec.ok = false;
        rec.note = *problem;
        ledger_.append(std::move(rec));
        last_error = *problem;
        unavailable.reset();
        spdlog::debug(R"({{"event":"reasoner_malformed","role":"{}","reason":"{}"}})", to_string(req.role), *problem);
    }
    if (unavailable) throw *unavailable;
    throw Error(ErrorCode::MalformedAfterRetry, std::string(to_string(req.role)) + ": " + last_error);
}

}  // namespace reponav
