#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reponav/digest.hpp"
#include "reponav/syntax.hpp"

namespace reponav {

/// Snapshot-scoped unit identifier: `path` for files, `path::Qual.name` otherwise.
struct UnitId {
    std::string value;

    UnitId() = default;
    explicit UnitId(std::string v) : value(std::move(v)) {}

    bool empty() const noexcept { return value.empty(); }
    auto operator<=>(const UnitId&) const = default;
};

struct UnitIdHash {
    std::size_t operator()(const UnitId& id) const noexcept { return std::hash<std::string>{}(id.value); }
};

enum class UnitKind { File, Class, Function, Documentation };

std::string_view to_string(UnitKind kind);
std::optional<UnitKind> parse_unit_kind(std::string_view text);

/// 1-based inclusive line range. An empty file is (1, 0).
struct LineSpan {
    int start = 1;
    int end = 0;

    int length() const noexcept { return end >= start ? end - start + 1 : 0; }
    bool contains(int line) const noexcept { return start <= line && line <= end; }
    bool contains(const LineSpan& o) const noexcept { return o.length() == 0 || (start <= o.start && o.end <= end); }
    auto operator<=>(const LineSpan&) const = default;
};

struct CodeUnit {
    UnitId id;
    UnitKind kind = UnitKind::File;
    std::string path;            ///< owning file, repo-relative
    std::string qualified_name;  ///< dotted: module.Class.method
    LineSpan span;
    int header_end = 0;  ///< last line of the declaration header
    std::optional<LineSpan> doc_span;
    std::string signature;
    std::optional<std::string> docstring;
    int line_count = 0;
    std::optional<UnitId> parent;
    std::vector<std::string> base_names;
    std::size_t child_count = 0;
    bool parse_degraded = false;
    bool stub = false;
};

enum class FileLanguage { Source, Documentation, Other };

struct SourceFile {
    std::string path;
    int line_count = 0;
    Sha256 content_digest{};
    std::string module_path;
    std::uint64_t size_bytes = 0;
    FileLanguage language = FileLanguage::Other;
};

struct Diagnostic {
    std::string path;
    std::string reason;
};

struct ScanOptions {
    std::vector<std::string> include_globs = {"**/*.py", "**/*.md", "**/*.rst", "**/*.txt"};
    std::vector<std::string> exclude_globs;  ///< added to the built-in VCS/index excludes
};

struct RepoSnapshot {
    std::filesystem::path root_path;
    std::vector<SourceFile> files;  ///< sorted by path
    std::string corpus_grammar_id;
    Sha256 snapshot_hash{};
    std::vector<std::string> include_globs;
    std::vector<std::string> exclude_globs;
    std::vector<Diagnostic> diagnostics;

    const SourceFile* find_file(std::string_view path) const;
};

struct RepoStats {
    std::size_t file_count = 0;
    double mean_dir_depth = 0.0;
    std::size_t total_lines = 0;
    std::map<UnitKind, std::size_t> unit_counts;
};

struct ParsedFile {
    std::vector<CodeUnit> units;  ///< pre-order; units[0] is the File unit
    FileSyntax syntax;
    bool degraded = false;
    std::string error;
};

/// Pluggable corpus grammar. One grammar per repository.
class Grammar {
public:
    virtual ~Grammar() = default;
    virtual std::string_view id() const = 0;
    virtual bool handles(std::string_view path) const = 0;
    /// Pure function of the path.
    virtual std::string module_path(std::string_view path) const = 0;
    /// Never throws on malformed source: degraded files come back as a lone File unit.
    virtual ParsedFile parse(const SourceFile& file, std::string_view text) const = 0;
};

/// Built-in excludes that always apply: VCS metadata and the index directory.
const std::vector<std::string>& default_excludes();
bool is_documentation_path(std::string_view path);
int count_lines(std::string_view text);

RepoSnapshot scan_repository(const std::filesystem::path& root, const ScanOptions& options, const Grammar& grammar);

std::vector<CodeUnit> parse_units(const SourceFile& file, std::string_view source_text, const Grammar& grammar);
ParsedFile parse_file(const SourceFile& file, std::string_view source_text, const Grammar& grammar);

std::string render_skeleton(const CodeUnit& unit);

RepoStats compute_repo_stats(const RepoSnapshot& snapshot, const std::vector<CodeUnit>& units);

/// Snapshot plus parsed units; immutable after construction.
class RepoModel {
public:
    RepoModel() = default;
    RepoModel(RepoSnapshot snapshot, std::vector<CodeUnit> units, std::vector<FileSyntax> syntax = {});

    const RepoSnapshot& snapshot() const noexcept { return snapshot_; }
    const std::vector<CodeUnit>& units() const noexcept { return units_; }
    /// Parallel to snapshot().files; empty when loaded from a persisted index.
    const std::vector<FileSyntax>& syntax() const noexcept { return syntax_; }

    const CodeUnit* find(const UnitId& id) const;
    const CodeUnit& at(const UnitId& id) const;  ///< throws UnknownUnit
    std::optional<std::size_t> index_of(const UnitId& id) const;
    const CodeUnit* file_unit(std::string_view path) const;
    /// Units of a file in pre-order.
    std::vector<const CodeUnit*> units_of_file(std::string_view path) const;
    /// Innermost unit whose span contains `line` (deepest wins on ties).
    const CodeUnit* innermost_unit(std::string_view path, int line) const;
    bool is_ancestor(const UnitId& ancestor, const UnitId& unit) const;
    std::filesystem::path absolute(std::string_view rel_path) const { return snapshot_.root_path / rel_path; }

private:
    RepoSnapshot snapshot_;
    std::vector<CodeUnit> units_;
    std::vector<FileSyntax> syntax_;
    std::unordered_map<UnitId, std::size_t, UnitIdHash> by_id_;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> file_ranges_;
    std::vector<int> depth_;
};

/// Scans, reads and parses a repository. Parsing runs in parallel; results keep snapshot order.
RepoModel build_repo_model(const std::filesystem::path& root, const ScanOptions& options, const Grammar& grammar);

/// Reads the lines [span.start, span.end] of a file from disk.
std::vector<std::string> read_lines(const std::filesystem::path& file, LineSpan span);

}  // namespace reponav
