#include "reponav/scout_tools.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "reponav/error.hpp"
#include "reponav/glob.hpp"

namespace reponav {

namespace fs = std::filesystem;

namespace {

/// Lexically normalized repo-relative directory ("" for root).
std::string normalize_dir(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) throw Error(ErrorCode::PathOutsideSnapshot, path);
    std::string norm = p.lexically_normal().generic_string();
    if (norm == "." || norm == "./") norm.clear();
    while (!norm.empty() && norm.back() == '/') norm.pop_back();
    if (norm == ".." || norm.rfind("../", 0) == 0) throw Error(ErrorCode::PathOutsideSnapshot, path);
    return norm;
}

std::string format_score(double x) { return fmt::format("{:.3f}", x); }

}  // namespace

DirListing directory_traverse(const RepoModel& model, const std::string& path, int max_depth, const ToolLimits& limits) {
    std::string dir = normalize_dir(path);
    std::string prefix = dir.empty() ? "" : dir + "/";
    max_depth = std::max(max_depth, 1);

    DirListing listing;
    listing.path = dir.empty() ? "." : dir;
    bool found = dir.empty();
    std::map<std::string, DirEntry> entries;
    for (const auto& file : model.snapshot().files) {
        if (file.path.compare(0, prefix.size(), prefix) != 0) continue;
        found = true;
        std::string rest = file.path.substr(prefix.size());
        // Directories on the way down, up to max_depth levels.
        std::size_t pos = 0;
        int depth = 1;
        while (true) {
            auto slash = rest.find('/', pos);
            if (slash == std::string::npos) break;
            if (depth > max_depth) break;
            entries.try_emplace(rest.substr(0, slash), DirEntry{rest.substr(0, slash), EntryKind::Dir, 0, {}});
            pos = slash + 1;
            ++depth;
        }
        auto components = static_cast<int>(std::count(rest.begin(), rest.end(), '/')) + 1;
        if (components > max_depth) continue;
        DirEntry e{rest, EntryKind::File, file.line_count, {}};
        for (const CodeUnit* u : model.units_of_file(file.path)) {
            if (u->kind != UnitKind::File) e.unit_counts[u->kind]++;
        }
        entries.emplace(rest, std::move(e));
    }
    if (!found) {
        std::error_code ec;
        if (!fs::is_directory(model.absolute(dir), ec)) throw Error(ErrorCode::PathNotFound, path);
    }
    for (auto& [name, e] : entries) {
        if (listing.entries.size() >= limits.max_entries) {
            listing.truncated = true;
            break;
        }
        listing.entries.push_back(std::move(e));
    }
    return listing;
}

SearchMatchReport codebase_search(const RepoModel& model, const std::string& pattern,
                                  const std::vector<std::string>& scope_globs, const ToolLimits& limits) {
    std::string source = pattern;
    auto flags = std::regex::ECMAScript;
    if (source.rfind("(?i)", 0) == 0) {
        source = source.substr(4);
        flags |= std::regex::icase;
    }
    std::regex re;
    try {
        re = std::regex(source, flags);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::InvalidPattern, pattern + ": " + e.what());
    }

    SearchMatchReport report;
    report.pattern = pattern;
    for (const auto& file : model.snapshot().files) {
        if (report.truncated) break;
        if (!scope_globs.empty() && !glob_match_any(scope_globs, file.path)) continue;
        std::ifstream in(model.absolute(file.path), std::ios::binary);
        if (!in) continue;
        FileMatchCount fm;
        fm.path = file.path;
        std::map<UnitId, std::size_t> per_unit;
        std::string line;
        for (int n = 1; std::getline(in, line); ++n) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::size_t count = 0;
            for (auto it = std::sregex_iterator(line.begin(), line.end(), re); it != std::sregex_iterator(); ++it) {
                if (report.total_matches + fm.match_count + count >= limits.max_matches) {
                    report.truncated = true;
                    break;
                }
                ++count;
            }
            if (count > 0) {
                fm.match_count += count;
                if (const CodeUnit* u = model.innermost_unit(file.path, n)) per_unit[u->id] += count;
            }
            if (report.truncated) break;
        }
        if (fm.match_count == 0) continue;
        for (auto& [unit, c] : per_unit) fm.units.push_back({unit, c});
        report.total_matches += fm.match_count;
        report.per_file.push_back(std::move(fm));
    }
    return report;
}

std::string first_line(const std::optional<std::string>& text) {
    if (!text) return {};
    auto b = text->find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = text->find('\n', b);
    std::string out = text->substr(b, e == std::string::npos ? std::string::npos : e - b);
    while (!out.empty() && (out.back() == ' ' || out.back() == '\r')) out.pop_back();
    return out;
}

std::vector<std::string> relation_notes(const RelationGraph& graph, const UnitId& unit, const std::vector<UnitId>& others) {
    static constexpr const char* kOut[] = {"imports", "inherits", "calls"};
    static constexpr const char* kIn[] = {"imported-by", "inherited-by", "called-by"};
    std::set<UnitId> other_set(others.begin(), others.end());
    std::vector<std::string> notes;
    for (auto layer : {Layer::Dependency, Layer::Inheritance, Layer::Call}) {
        auto li = static_cast<std::size_t>(layer);
        for (const auto& dst : graph.successors(unit, layer))
            if (dst != unit && other_set.count(dst)) notes.push_back(std::string(kOut[li]) + " " + dst.value);
        for (const auto& src : graph.predecessors(unit, layer))
            if (src != unit && other_set.count(src)) notes.push_back(std::string(kIn[li]) + " " + src.value);
    }
    return notes;
}

CandidateProfile render_candidate_profile(const CodeUnit& unit, const Provenance& provenance,
                                          const std::vector<std::string>& relations) {
    CandidateProfile p;
    p.unit = unit.id;
    p.provenance = provenance;
    p.kind = unit.kind;
    p.signature = unit.signature;
    p.base_names = unit.base_names;
    p.doc_first_line = first_line(unit.docstring);
    p.relation_notes = relations;
    p.cost_metric = unit.line_count;

    std::string text = fmt::format("- {} [{}, {} lines]\n", unit.id.value, to_string(unit.kind), unit.line_count);
    if (!unit.signature.empty()) text += "  sig: " + unit.signature + "\n";
    if (!p.doc_first_line.empty()) text += "  doc: " + p.doc_first_line + "\n";
    std::vector<std::string> src;
    if (provenance.retrieval) src.push_back("retrieval " + format_score(*provenance.retrieval));
    if (provenance.tool_matches) src.push_back("tool " + std::to_string(*provenance.tool_matches));
    if (provenance.graph_path) src.push_back("graph: " + *provenance.graph_path);
    if (!src.empty()) text += "  via: " + fmt::format("{}", fmt::join(src, "; ")) + "\n";
    if (!relations.empty()) text += "  rel: " + fmt::format("{}", fmt::join(relations, "; ")) + "\n";
    p.text = std::move(text);
    return p;
}

nlohmann::json to_json(const DirListing& listing) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : listing.entries) {
        nlohmann::json item;
        item["name"] = e.name;
        item["kind"] = e.kind == EntryKind::File ? "file" : "dir";
        if (e.kind == EntryKind::File) {
            item["lines"] = e.line_count;
            nlohmann::json counts = nlohmann::json::object();
            for (auto& [k, n] : e.unit_counts) counts[std::string(to_string(k))] = n;
            item["units"] = counts;
        }
        entries.push_back(std::move(item));
    }
    return {{"path", listing.path}, {"entries", entries}, {"truncated", listing.truncated}};
}

nlohmann::json to_json(const SearchMatchReport& report) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : report.per_file) {
        nlohmann::json units = nlohmann::json::array();
        for (const auto& u : f.units) units.push_back({{"unit", u.unit.value}, {"count", u.count}});
        files.push_back({{"path", f.path}, {"matches", f.match_count}, {"units", units}});
    }
    return {{"pattern", report.pattern},
            {"files", files},
            {"total_matches", report.total_matches},
            {"truncated", report.truncated}};
}

nlohmann::json to_json(const Provenance& provenance) {
    nlohmann::json j = nlohmann::json::object();
    if (provenance.retrieval) j["retrieval"] = *provenance.retrieval;
    if (provenance.tool_matches) j["tool"] = *provenance.tool_matches;
    if (provenance.graph_path) j["graph"] = *provenance.graph_path;
    return j;
}

nlohmann::json run_tool(const RepoModel& model, const nlohmann::json& request, const ToolLimits& limits) {
    nlohmann::json response = {{"ok", false}, {"payload", nullptr}, {"diagnostics", nlohmann::json::array()}};
    auto fail = [&](const std::string& code, const std::string& message) {
        response["diagnostics"].push_back({{"code", code}, {"message", message}});
        return response;
    };
    if (!request.is_object() || !request.contains("tool") || !request["tool"].is_string())
        return fail("InvalidRequest", "missing tool name");
    const std::string tool = request["tool"];
    nlohmann::json args = request.value("args", nlohmann::json::object());
    if (!args.is_object()) return fail("InvalidRequest", "args must be an object");
    try {
        if (tool == "traverse") {
            std::string path = args.value("path", std::string("."));
            int depth = args.value("max_depth", 1);
            response["payload"] = to_json(directory_traverse(model, path, depth, limits));
        } else if (tool == "search") {
            if (!args.contains("pattern") || !args["pattern"].is_string())
                return fail("InvalidRequest", "search needs a string pattern");
            std::vector<std::string> scope;
            if (args.contains("scope")) scope = args["scope"].get<std::vector<std::string>>();
            auto report = codebase_search(model, args["pattern"].get<std::string>(), scope, limits);
            if (report.truncated)
                response["diagnostics"].push_back(
                    {{"code", "PatternTooBroad"}, {"message", fmt::format("match cap {} reached", limits.max_matches)}});
            response["payload"] = to_json(report);
        } else {
            return fail("InvalidRequest", "unknown tool " + tool);
        }
    } catch (const Error& e) {
        return fail(std::string(to_string(e.code())), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail("InvalidRequest", e.what());
    }
    response["ok"] = true;
    return response;
}

}  // namespace reponav
