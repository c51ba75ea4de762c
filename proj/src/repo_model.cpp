#include "reponav/repo_model.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "reponav/error.hpp"
#include "reponav/glob.hpp"
#include "reponav/parallel.hpp"

namespace fs = std::filesystem;

namespace reponav {

std::string_view to_string(UnitKind kind) {
    switch (kind) {
        case UnitKind::File: return "File";
        case UnitKind::Class: return "Class";
        case UnitKind::Function: return "Function";
        case UnitKind::Documentation: return "Documentation";
    }
    return "File";
}

std::optional<UnitKind> parse_unit_kind(std::string_view text) {
    if (text == "File") return UnitKind::File;
    if (text == "Class") return UnitKind::Class;
    if (text == "Function") return UnitKind::Function;
    if (text == "Documentation") return UnitKind::Documentation;
    return std::nullopt;
}

std::string render_chain(const Chain& chain) {
    std::string out;
    for (const auto& seg : chain) {
        switch (seg.kind) {
            case SegmentKind::Name: out += seg.name; break;
            case SegmentKind::Attr: out += "." + seg.name; break;
            case SegmentKind::Call: out += "()"; break;
            case SegmentKind::Subscript: out += "[]"; break;
        }
    }
    return out;
}

const SourceFile* RepoSnapshot::find_file(std::string_view path) const {
    auto it = std::lower_bound(files.begin(), files.end(), path,
                               [](const SourceFile& f, std::string_view p) { return f.path < p; });
    return it != files.end() && it->path == path ? &*it : nullptr;
}

const std::vector<std::string>& default_excludes() {
    static const std::vector<std::string> excludes = {"**/.git/**", "**/.hg/**", "**/.svn/**", "**/.reponav/**"};
    return excludes;
}

bool is_documentation_path(std::string_view path) {
    auto ends = [&](std::string_view ext) {
        return path.size() > ext.size() && path.substr(path.size() - ext.size()) == ext;
    };
    return ends(".md") || ends(".rst") || ends(".txt");
}

int count_lines(std::string_view text) {
    if (text.empty()) return 0;
    auto n = static_cast<int>(std::count(text.begin(), text.end(), '\n'));
    return text.back() == '\n' ? n : n + 1;
}

namespace {

bool read_file(const fs::path& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return false;
    out = std::move(ss).str();
    return true;
}

bool looks_binary(std::string_view bytes) {
    return bytes.substr(0, 8192).find('\0') != std::string_view::npos;
}

void log_diagnostic(const Diagnostic& d) {
    spdlog::warn(R"({{"event":"file_skipped","path":"{}","reason":"{}"}})", d.path, d.reason);
}

bool is_excluded_dir(const fs::path& name) {
    auto n = name.string();
    return n == ".git" || n == ".hg" || n == ".svn" || n == ".reponav";
}

}  // namespace

RepoSnapshot scan_repository(const fs::path& root, const ScanOptions& options, const Grammar& grammar) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(ErrorCode::RootNotFound, root.string());
    RepoSnapshot snap;
    snap.root_path = fs::weakly_canonical(fs::absolute(root));
    snap.corpus_grammar_id = std::string(grammar.id());
    snap.include_globs = options.include_globs;
    snap.exclude_globs = default_excludes();
    snap.exclude_globs.insert(snap.exclude_globs.end(), options.exclude_globs.begin(), options.exclude_globs.end());

    fs::recursive_directory_iterator it(snap.root_path, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw Error(ErrorCode::RootNotFound, root.string() + ": " + ec.message());
    const auto root_str = snap.root_path.string();
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) break;
        const auto& entry = *it;
        auto rel = entry.path().lexically_relative(snap.root_path).generic_string();
        if (entry.is_directory(ec)) {
            if (is_excluded_dir(entry.path().filename()) || entry.is_symlink(ec)) it.disable_recursion_pending();
            continue;
        }
        if (!entry.is_regular_file(ec)) continue;
        if (!glob_match_any(snap.include_globs, rel) || glob_match_any(snap.exclude_globs, rel)) continue;
        if (entry.is_symlink(ec)) {
            auto target = fs::weakly_canonical(entry.path(), ec).string();
            if (ec || target.compare(0, root_str.size() + 1, root_str + "/") != 0) {
                snap.diagnostics.push_back({rel, "symlink target outside root"});
                log_diagnostic(snap.diagnostics.back());
                continue;
            }
        }
        std::string bytes;
        if (!read_file(entry.path(), bytes)) {
            snap.diagnostics.push_back({rel, "UnreadableFile"});
            log_diagnostic(snap.diagnostics.back());
            continue;
        }
        if (looks_binary(bytes)) {
            snap.diagnostics.push_back({rel, "binary file"});
            continue;
        }
        SourceFile f;
        f.path = rel;
        f.line_count = count_lines(bytes);
        f.content_digest = sha256(bytes);
        f.size_bytes = bytes.size();
        if (grammar.handles(rel)) {
            f.language = FileLanguage::Source;
            f.module_path = grammar.module_path(rel);
        } else if (is_documentation_path(rel)) {
            f.language = FileLanguage::Documentation;
        }
        snap.files.push_back(std::move(f));
    }
    std::sort(snap.files.begin(), snap.files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    std::sort(snap.diagnostics.begin(), snap.diagnostics.end(),
              [](const auto& a, const auto& b) { return std::tie(a.path, a.reason) < std::tie(b.path, b.reason); });

    Sha256Builder h;
    h.update_field(snap.corpus_grammar_id);
    for (const auto& f : snap.files) {
        h.update_field(f.path);
        h.update(std::string_view(reinterpret_cast<const char*>(f.content_digest.data()), f.content_digest.size()));
    }
    snap.snapshot_hash = h.finish();
    return snap;
}

namespace {

ParsedFile parse_documentation(const SourceFile& file, std::string_view text) {
    ParsedFile out;
    CodeUnit f;
    f.id = UnitId(file.path);
    f.kind = UnitKind::File;
    f.path = file.path;
    f.qualified_name = file.path;
    f.span = LineSpan{1, file.line_count};
    f.line_count = f.span.length();
    out.units.push_back(f);
    if (file.line_count == 0) return out;

    CodeUnit d;
    d.id = UnitId(file.path + "::__doc__");
    d.kind = UnitKind::Documentation;
    d.path = file.path;
    d.qualified_name = file.path + ".__doc__";
    d.span = f.span;
    d.line_count = f.line_count;
    d.parent = f.id;
    std::istringstream in{std::string(text)};
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        d.docstring = line.substr(b, e - b + 1);
        d.doc_span = LineSpan{n, n};
        d.header_end = n - 1;
        break;
    }
    out.units[0].docstring = d.docstring;
    out.units[0].child_count = 1;
    out.units.push_back(std::move(d));
    return out;
}

}  // namespace

ParsedFile parse_file(const SourceFile& file, std::string_view source_text, const Grammar& grammar) {
    if (grammar.handles(file.path)) return grammar.parse(file, source_text);
    if (is_documentation_path(file.path)) return parse_documentation(file, source_text);
    ParsedFile out;
    CodeUnit f;
    f.id = UnitId(file.path);
    f.kind = UnitKind::File;
    f.path = file.path;
    f.qualified_name = file.path;
    f.span = LineSpan{1, file.line_count};
    f.line_count = f.span.length();
    out.units.push_back(std::move(f));
    return out;
}

std::vector<CodeUnit> parse_units(const SourceFile& file, std::string_view source_text, const Grammar& grammar) {
    return parse_file(file, source_text, grammar).units;
}

std::string render_skeleton(const CodeUnit& unit) {
    std::string out;
    if (unit.kind == UnitKind::File) {
        out += "path: " + unit.path + "\n";
        out += "kind: File\n";
        out += "children: " + std::to_string(unit.child_count) + "\n";
        out += "lines: " + std::to_string(unit.line_count) + "\n";
        return out;
    }
    std::string doc = "(none)";
    if (unit.docstring && !unit.docstring->empty()) doc = unit.docstring->substr(0, unit.docstring->find('\n'));
    out += "name: " + unit.qualified_name + "\n";
    out += "kind: " + std::string(to_string(unit.kind)) + "\n";
    out += "signature: " + (unit.signature.empty() ? std::string("(none)") : unit.signature) + "\n";
    out += "span: " + std::to_string(unit.span.start) + "-" + std::to_string(unit.span.end) + " (" +
           std::to_string(unit.line_count) + " lines)\n";
    out += "doc: " + doc + "\n";
    return out;
}

RepoStats compute_repo_stats(const RepoSnapshot& snapshot, const std::vector<CodeUnit>& units) {
    RepoStats stats;
    stats.file_count = snapshot.files.size();
    std::size_t depth_sum = 0;
    for (const auto& f : snapshot.files) {
        depth_sum += static_cast<std::size_t>(std::count(f.path.begin(), f.path.end(), '/'));
        stats.total_lines += static_cast<std::size_t>(f.line_count);
    }
    if (stats.file_count > 0) stats.mean_dir_depth = static_cast<double>(depth_sum) / static_cast<double>(stats.file_count);
    for (auto kind : {UnitKind::File, UnitKind::Class, UnitKind::Function, UnitKind::Documentation}) stats.unit_counts[kind] = 0;
    for (const auto& u : units) stats.unit_counts[u.kind]++;
    return stats;
}

RepoModel::RepoModel(RepoSnapshot snapshot, std::vector<CodeUnit> units, std::vector<FileSyntax> syntax)
    : snapshot_(std::move(snapshot)), units_(std::move(units)), syntax_(std::move(syntax)) {
    by_id_.reserve(units_.size());
    depth_.resize(units_.size(), 0);
    for (std::size_t k = 0; k < units_.size(); ++k) {
        const auto& u = units_[k];
        by_id_.emplace(u.id, k);
        auto [it, inserted] = file_ranges_.try_emplace(u.path, k, k + 1);
        if (!inserted) it->second.second = k + 1;
        if (u.parent) {
            auto p = by_id_.find(*u.parent);
            if (p != by_id_.end()) depth_[k] = depth_[p->second] + 1;
        }
    }
}

const CodeUnit* RepoModel::find(const UnitId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &units_[it->second];
}

const CodeUnit& RepoModel::at(const UnitId& id) const {
    const auto* u = find(id);
    if (u == nullptr) throw Error(ErrorCode::UnknownUnit, id.value);
    return *u;
}

std::optional<std::size_t> RepoModel::index_of(const UnitId& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

const CodeUnit* RepoModel::file_unit(std::string_view path) const {
    auto it = file_ranges_.find(std::string(path));
    return it == file_ranges_.end() ? nullptr : &units_[it->second.first];
}

std::vector<const CodeUnit*> RepoModel::units_of_file(std::string_view path) const {
    std::vector<const CodeUnit*> out;
    auto it = file_ranges_.find(std::string(path));
    if (it == file_ranges_.end()) return out;
    for (auto k = it->second.first; k < it->second.second; ++k) out.push_back(&units_[k]);
    return out;
}

const CodeUnit* RepoModel::innermost_unit(std::string_view path, int line) const {
    auto it = file_ranges_.find(std::string(path));
    if (it == file_ranges_.end()) return nullptr;
    const CodeUnit* best = nullptr;
    int best_depth = -1;
    for (auto k = it->second.first; k < it->second.second; ++k) {
        const auto& u = units_[k];
        bool inside = u.span.contains(line) || (u.kind == UnitKind::File);
        if (inside && depth_[k] >= best_depth) {
            best = &u;
            best_depth = depth_[k];
        }
    }
    return best;
}

bool RepoModel::is_ancestor(const UnitId& ancestor, const UnitId& unit) const {
    const auto* u = find(unit);
    while (u != nullptr && u->parent) {
        if (*u->parent == ancestor) return true;
        u = find(*u->parent);
    }
    return false;
}

RepoModel build_repo_model(const fs::path& root, const ScanOptions& options, const Grammar& grammar) {
    auto snapshot = scan_repository(root, options, grammar);
    const auto& files = snapshot.files;
    std::vector<ParsedFile> parsed(files.size());
    std::vector<std::string> failures(files.size());

    parallel_for(files.size(), [&](std::size_t k) {
        std::ifstream in(snapshot.root_path / files[k].path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        parsed[k] = parse_file(files[k], ss.str(), grammar);
        if (parsed[k].degraded) failures[k] = parsed[k].error;
    });

    std::vector<CodeUnit> units;
    std::vector<FileSyntax> syntax;
    syntax.reserve(files.size());
    for (std::size_t k = 0; k < files.size(); ++k) {
        if (!failures[k].empty()) {
            snapshot.diagnostics.push_back({files[k].path, "parse_degraded: " + failures[k]});
            log_diagnostic(snapshot.diagnostics.back());
        }
        for (auto& u : parsed[k].units) units.push_back(std::move(u));
        syntax.push_back(std::move(parsed[k].syntax));
    }
    std::sort(snapshot.diagnostics.begin(), snapshot.diagnostics.end(),
              [](const auto& a, const auto& b) { return std::tie(a.path, a.reason) < std::tie(b.path, b.reason); });
    return RepoModel(std::move(snapshot), std::move(units), std::move(syntax));
}

std::vector<std::string> read_lines(const fs::path& file, LineSpan span) {
    std::vector<std::string> out;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableFile, file.string());
    std::string line;
    for (int n = 1; n <= span.end && std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (n >= span.start) out.push_back(std::move(line));
    }
    return out;
}

}  // namespace reponav
