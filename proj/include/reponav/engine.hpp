#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "reponav/config.hpp"
#include "reponav/navigator.hpp"
#include "reponav/persistence.hpp"
#include "reponav/python_grammar.hpp"
#include "reponav/reasoner.hpp"

namespace reponav {

/// Default index directory for a repository root.
std::filesystem::path default_index_dir(const std::filesystem::path& root);

/// Scan, parse, build the graph and indices, then persist.
IndexManifest build_index(const std::filesystem::path& root, const std::filesystem::path& index_dir,
                          const AppConfig& config);

struct SessionOutcome {
    nlohmann::ordered_json payload;
    nlohmann::ordered_json trace;
    std::vector<LedgerRecord> ledger;
    std::vector<std::string> prompts;
    std::vector<std::string> tool_outputs;
};

/// Read path shared by the CLI and the service. Safe for concurrent sessions.
class Engine {
public:
    Engine(AppConfig config, LoadedIndex index);

    /// Scripted responses used for every session instead of the live backend.
    void set_script(nlohmann::json script);

    const AppConfig& config() const noexcept { return config_; }
    const LoadedIndex& index() const noexcept { return index_; }
    const std::string& snapshot_hash() const noexcept { return index_.manifest.snapshot_hash; }

    /// Scout, select, and rank files. `payload` is the locate result.
    SessionOutcome locate(const std::string& query, std::optional<std::size_t> top_k = std::nullopt);
    /// Scout and select; `payload` is the context pack with bodies.
    SessionOutcome context(const std::string& query);
    /// Context pack handed to the answer role. Throws ReasonerUnavailable.
    SessionOutcome answer(const std::string& query);
    /// Raw hybrid retrieval without the reasoner.
    nlohmann::ordered_json query(const std::string& query, std::optional<std::size_t> top_k = std::nullopt) const;
    nlohmann::ordered_json stats() const;

    /// Cumulative ledger over every session served by this engine.
    const TokenLedger& ledger() const noexcept { return ledger_; }

private:
    struct Scouted;
    Scouted scout(const std::string& query, ReasonerBackend& backend, TokenLedger& ledger);
    std::unique_ptr<ReasonerBackend> make_backend() const;
    void book(const TokenLedger& session);
    void write_trace(const nlohmann::ordered_json& trace) const;

    AppConfig config_;
    LoadedIndex index_;
    std::unique_ptr<EmbeddingProvider> provider_;
    std::optional<std::string> provider_note_;
    std::optional<nlohmann::json> script_;
    TokenLedger ledger_;
};

nlohmann::ordered_json to_json(const ContextPack& pack, bool with_bodies);

}  // namespace reponav
