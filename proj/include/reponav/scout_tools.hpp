#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reponav/relation_graph.hpp"
#include "reponav/repo_model.hpp"

namespace reponav {

struct ToolLimits {
    std::size_t max_entries = 500;
    std::size_t max_matches = 10000;
};

enum class EntryKind { File, Dir };

struct DirEntry {
    std::string name;  ///< relative to the listed directory
    EntryKind kind = EntryKind::File;
    int line_count = 0;
    std::map<UnitKind, std::size_t> unit_counts;  ///< files only
};

struct DirListing {
    std::string path;
    std::vector<DirEntry> entries;  ///< sorted by name
    bool truncated = false;
};

/// Lists indexed files and directories below `path` (repo-relative, "" or "." for root).
/// Throws PathOutsideSnapshot or PathNotFound.
DirListing directory_traverse(const RepoModel& model, const std::string& path, int max_depth,
                              const ToolLimits& limits = {});

struct UnitMatchCount {
    UnitId unit;
    std::size_t count = 0;
};

struct FileMatchCount {
    std::string path;
    std::size_t match_count = 0;
    std::vector<UnitMatchCount> units;  ///< innermost enclosing unit per matching line, sorted by id
};

struct SearchMatchReport {
    std::string pattern;
    std::vector<FileMatchCount> per_file;  ///< sorted by path
    std::size_t total_matches = 0;
    bool truncated = false;  ///< match cap reached (PatternTooBroad)
};

/// Per-line, non-overlapping regex matches; case-sensitive unless the pattern
/// starts with `(?i)`. Throws InvalidPattern.
SearchMatchReport codebase_search(const RepoModel& model, const std::string& pattern,
                                  const std::vector<std::string>& scope_globs = {}, const ToolLimits& limits = {});

struct Provenance {
    std::optional<double> retrieval;         ///< fused Rel(u)
    std::optional<std::size_t> tool_matches;
    std::optional<std::string> graph_path;   ///< e.g. `f →call g`

    bool empty() const { return !retrieval && !tool_matches && !graph_path; }
};

struct CandidateProfile {
    UnitId unit;
    Provenance provenance;
    UnitKind kind = UnitKind::File;
    std::string signature;
    std::vector<std::string> base_names;
    std::string doc_first_line;
    std::vector<std::string> relation_notes;
    int cost_metric = 0;  ///< line count
    std::string text;     ///< rendering shown to the reasoner
};

/// Notes such as `called-by X` or `inherits Y` for edges between `unit` and `others`.
std::vector<std::string> relation_notes(const RelationGraph& graph, const UnitId& unit, const std::vector<UnitId>& others);

CandidateProfile render_candidate_profile(const CodeUnit& unit, const Provenance& provenance,
                                          const std::vector<std::string>& relations);

std::string first_line(const std::optional<std::string>& text);

nlohmann::json to_json(const DirListing& listing);
nlohmann::json to_json(const SearchMatchReport& report);
nlohmann::json to_json(const Provenance& provenance);

/// Tool-call envelope: {tool, args} -> {ok, payload, diagnostics}.
nlohmann::json run_tool(const RepoModel& model, const nlohmann::json& request, const ToolLimits& limits = {});

}  // namespace reponav
