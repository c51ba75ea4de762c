#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "reponav/hybrid_index.hpp"
#include "reponav/python_grammar.hpp"
#include "reponav/relation_graph.hpp"
#include "reponav/repo_model.hpp"

namespace reponav::testing {

inline std::filesystem::path fixture_dir() { return REPONAV_FIXTURE_DIR; }
inline std::filesystem::path sample_repo() { return fixture_dir() / "sample_repo"; }

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, std::string_view text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("reponav-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct Fixture {
    RepoModel model;
    RelationGraph graph;
    HybridIndex index;
};

/// The sample repository, built once per process.
inline const Fixture& sample() {
    static const Fixture f = [] {
        PythonGrammar grammar;
        Fixture out;
        out.model = build_repo_model(sample_repo(), {}, grammar);
        out.graph = build_relation_graph(out.model);
        out.index = build_hybrid_index(out.model, nullptr);
        return out;
    }();
    return f;
}

inline RepoModel model_from_files(const std::filesystem::path& root,
                                  const std::vector<std::pair<std::string, std::string>>& files) {
    for (const auto& [rel, text] : files) write_text(root / rel, text);
    PythonGrammar grammar;
    return build_repo_model(root, {}, grammar);
}

/// Lines strictly inside a unit body: after the header (and docstring), up to the span end.
inline std::vector<std::string> interior_lines(const RepoModel& model, const CodeUnit& u) {
    if (u.kind == UnitKind::File || u.kind == UnitKind::Documentation) return {};
    int from = u.header_end + 1;
    if (u.doc_span) from = std::max(from, u.doc_span->end + 1);
    if (from > u.span.end) return {};
    return read_lines(model.absolute(u.path), {from, u.span.end});
}


/// Trimmed text of every line whose innermost unit is a class or function and that lies
/// past the unit header and outside its docstring. Lines whose text also occurs outside
/// any body (headers, module code) are left out, since that text is visible anyway.
inline std::set<std::string> interior_texts(const RepoModel& model, std::size_t min_len = 12) {
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::set<std::string> inside, outside;
    for (const auto& file : model.snapshot().files) {
        auto lines = read_lines(model.absolute(file.path), {1, std::max(file.line_count, 1)});
        for (int n = 1; n <= static_cast<int>(lines.size()); ++n) {
            std::string text = trim(lines[n - 1]);
            if (text.size() < min_len) continue;
            const CodeUnit* u = model.innermost_unit(file.path, n);
            bool interior = u && (u->kind == UnitKind::Class || u->kind == UnitKind::Function) && n > u->header_end &&
                            !(u->doc_span && u->doc_span->contains(n));
            (interior ? inside : outside).insert(text);
        }
    }
    for (const auto& t : outside) inside.erase(t);
    return inside;
}

/// First interior text found in `haystack`, if any.
inline std::optional<std::string> leaked_line(const std::set<std::string>& interior, const std::string& haystack) {
    for (const auto& t : interior)
        if (haystack.find(t) != std::string::npos) return t;
    return std::nullopt;
}

}  // namespace reponav::testing
