#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reponav/budget_policy.hpp"
#include "reponav/embedding.hpp"
#include "reponav/reasoner.hpp"
#include "reponav/repo_model.hpp"
#include "reponav/scout_tools.hpp"

namespace reponav {

enum class EmbeddingChoice { None, Mock, Http, Env };

struct EmbeddingSettings {
    EmbeddingChoice provider = EmbeddingChoice::None;
    int mock_dim = 64;
    HttpEmbeddingConfig http;
};

struct ReasonerSettings {
    std::optional<std::string> scripted;  ///< script file; overrides the live backend
    HttpReasonerConfig http;              ///< empty url: taken from the environment
    int max_attempts = 2;
};

struct AppConfig {
    BudgetConfig budget;
    std::optional<std::string> index_dir;
    ScanOptions scan;
    EmbeddingSettings embedding;
    ReasonerSettings reasoner;
    ToolLimits tools;
    std::size_t working_set_cap = 50;
    std::size_t top_k = 10;
    std::optional<std::string> trace_path;
    std::string host = "127.0.0.1";
    int port = 8080;

    /// Throws ConfigError on unknown keys, wrong types or violated bounds.
    static AppConfig from_json(const nlohmann::json& j);
    static AppConfig from_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

/// Index-relevant subset echoed into the manifest.
nlohmann::ordered_json config_echo(const AppConfig& cfg);

/// Provider chosen by the config; null for `none`.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& settings);

}  // namespace reponav
