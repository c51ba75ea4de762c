#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "reponav/hybrid_index.hpp"
#include "reponav/relation_graph.hpp"
#include "reponav/repo_model.hpp"

namespace reponav {

inline constexpr int kIndexFormatVersion = 1;

struct SectionInfo {
    std::string file;
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct IndexManifest {
    int format_version = kIndexFormatVersion;
    std::string snapshot_hash;
    std::string corpus_grammar_id;
    std::string root;
    std::optional<std::string> provider_id;
    int dim = 0;
    std::map<std::string, SectionInfo> sections;  ///< units, graph, sparse, dense
    std::string built_at;                         ///< UTC, ISO 8601
    nlohmann::ordered_json config = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
    static IndexManifest from_json(const nlohmann::json& j);
};

struct LoadedIndex {
    IndexManifest manifest;
    RepoModel model;
    RelationGraph graph;
    HybridIndex index;
};

inline constexpr const char* kManifestFile = "manifest.json";

bool index_exists(const std::filesystem::path& dir);

/// Writes manifest.json plus units.json, graph.bin, sparse.bin and dense.bin.
IndexManifest save_index(const std::filesystem::path& dir, const RepoModel& model, const RelationGraph& graph,
                         const HybridIndex& index, const nlohmann::ordered_json& config_echo);

struct LoadOptions {
    bool allow_stale = false;
};

/// Throws IndexMissing, CorruptIndex (digest or format mismatch) or StaleIndex
/// (the repository no longer hashes to the manifest's snapshot_hash).
LoadedIndex load_index(const std::filesystem::path& dir, const Grammar& grammar, const LoadOptions& options = {});

IndexManifest read_manifest(const std::filesystem::path& dir);

/// Canonical section bytes, the input to the section digests.
std::string serialize_units(const RepoModel& model);
std::string serialize_graph(const RelationGraph& graph);
std::string serialize_sparse(const HybridIndex& index);
std::string serialize_dense(const HybridIndex& index);

}  // namespace reponav
