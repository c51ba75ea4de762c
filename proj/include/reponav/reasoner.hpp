#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reponav {

enum class Role { Augment, InitDecision, Complexity, RefineDecision, Answer };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

inline constexpr int kReasonerSchemaVersion = 1;

struct ReasonerRequest {
    Role role = Role::Answer;
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
    int schema_version = kReasonerSchemaVersion;
};

/// Plain-text prompt for a request: a role instruction followed by the payload fields.
std::string render_prompt(const ReasonerRequest& request);

/// Checks a parsed response against the role's schema; returns an error message or nullopt.
std::optional<std::string> validate_response(Role role, const nlohmann::json& response);

/// Synthetic token count: ceil(chars / 4).
std::size_t synthetic_tokens(std::string_view text);

struct LedgerRecord {
    Role role = Role::Answer;
    std::string model_id;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    bool ok = true;
    std::string note;
};

/// Append-only record of every reasoner attempt; appends are serialized.
class TokenLedger {
public:
    void append(LedgerRecord record);
    std::vector<LedgerRecord> records() const;
    std::size_t size() const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::vector<LedgerRecord> records_;
};

struct Price {
    double input_per_million = 0.0;
    double output_per_million = 0.0;
};

using PriceTable = std::map<std::string, Price>;

PriceTable default_price_table();

struct TokenTotals {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::size_t calls = 0;

    std::size_t total() const { return prompt_tokens + completion_tokens; }
};

struct CostSummary {
    std::map<Role, TokenTotals> per_role;
    TokenTotals totals;
    std::optional<double> cost_usd;  ///< nullopt when a record's model has no price
    std::vector<std::string> unpriced_models;

    std::string render() const;
    nlohmann::ordered_json to_json() const;
};

CostSummary ledger_report(const std::vector<LedgerRecord>& records, const PriceTable& prices);

struct Completion {
    std::string text;
    std::optional<std::size_t> prompt_tokens;  ///< backend-reported usage, if any
    std::optional<std::size_t> completion_tokens;
};

/// Transport for one attempt. Throws Error(ReasonerUnavailable) on failure.
class ReasonerBackend {
public:
    virtual ~ReasonerBackend() = default;
    virtual std::string model_id() const = 0;
    virtual Completion complete(Role role, const std::string& prompt) = 0;
};

/// Replays canned responses keyed by (role, occurrence index).
///
/// Script JSON: {"model": "...", "strict": bool, "responses": {"<role>": [resp, ...]}}.
/// A JSON string is replied verbatim; any other value is replied serialized.
class ScriptedBackend final : public ReasonerBackend {
public:
    ScriptedBackend(std::map<Role, std::vector<nlohmann::json>> script, bool strict, std::string model = "scripted");

    static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

    std::string model_id() const override { return model_; }
    Completion complete(Role role, const std::string& prompt) override;
    void reset();

private:
    std::map<Role, std::vector<nlohmann::json>> script_;
    bool strict_;
    std::string model_;
    std::mutex mutex_;
    std::map<Role, std::size_t> cursor_;
};

struct HttpReasonerConfig {
    std::string url;  ///< chat-completions style endpoint
    std::string model;
    std::string api_key;
    std::chrono::milliseconds timeout{30000};
};

/// OpenAI-style chat endpoint: {model, messages, response_format} -> choices[0].message.content.
class HttpReasonerBackend final : public ReasonerBackend {
public:
    explicit HttpReasonerBackend(HttpReasonerConfig config) : config_(std::move(config)) {}

    std::string model_id() const override { return config_.model; }
    Completion complete(Role role, const std::string& prompt) override;

private:
    HttpReasonerConfig config_;
};

/// Always unavailable; callers fall back to their degenerate behaviour.
class NullBackend final : public ReasonerBackend {
public:
    std::string model_id() const override { return "none"; }
    Completion complete(Role role, const std::string& prompt) override;
};

/// Reads REASONER_URL / REASONER_MODEL / REASONER_API_KEY; null when REASONER_URL is unset.
std::unique_ptr<ReasonerBackend> reasoner_backend_from_env(std::chrono::milliseconds timeout);

/// Role-typed front end: renders, dispatches, validates, retries once and
/// books every attempt in the ledger.
class Reasoner {
public:
    Reasoner(ReasonerBackend& backend, TokenLedger& ledger, int max_attempts = 2)
        : backend_(backend), ledger_(ledger), max_attempts_(max_attempts) {}

    /// Throws MalformedAfterRetry, ReasonerUnavailable or ScriptExhausted.
    nlohmann::json request(const ReasonerRequest& request);

    /// Prompts sent so far, in order.
    const std::vector<std::string>& prompts() const noexcept { return prompts_; }
    TokenLedger& ledger() noexcept { return ledger_; }
    std::string model_id() const { return backend_.model_id(); }

private:
    ReasonerBackend& backend_;
    TokenLedger& ledger_;
    int max_attempts_;
    std::vector<std::string> prompts_;
};

}  // namespace reponav
