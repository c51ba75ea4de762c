#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "reponav/engine.hpp"
#include "reponav/error.hpp"
#include "reponav/service.hpp"

namespace fs = std::filesystem;
using namespace reponav;

namespace {

enum Exit { kOk = 0, kFailure = 1, kScanFailure = 2, kIndexMissing = 3, kIndexUnusable = 4, kReasonerFailure = 5 };

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::RootNotFound:
        case ErrorCode::UnreadableFile: return kScanFailure;
        case ErrorCode::IndexMissing: return kIndexMissing;
        case ErrorCode::StaleIndex:
        case ErrorCode::CorruptIndex: return kIndexUnusable;
        case ErrorCode::ReasonerUnavailable:
        case ErrorCode::MalformedAfterRetry:
        case ErrorCode::ScriptExhausted: return kReasonerFailure;
        default: return kFailure;
    }
}

struct Common {
    std::string config_path;
    std::string index_dir;
    std::string scripted;
    std::string trace;
    std::size_t top_k = 0;
    bool allow_stale = false;
    bool verbose = false;
};

AppConfig load_config(const Common& c) {
    auto cfg = c.config_path.empty() ? AppConfig{} : AppConfig::from_file(c.config_path);
    if (!c.scripted.empty()) cfg.reasoner.scripted = c.scripted;
    if (!c.trace.empty()) cfg.trace_path = c.trace;
    if (c.top_k > 0) cfg.top_k = c.top_k;
    return cfg;
}

fs::path index_dir_for(const Common& c, const AppConfig& cfg, const fs::path& fallback) {
    if (!c.index_dir.empty()) return c.index_dir;
    if (cfg.index_dir) return *cfg.index_dir;
    return fallback;
}

Engine open_engine(const Common& c, const AppConfig& cfg) {
    auto dir = index_dir_for(c, cfg, default_index_dir("."));
    PythonGrammar grammar;
    return Engine(cfg, load_index(dir, grammar, {c.allow_stale}));
}

Service* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metadata-first repository navigator"};
    app.require_subcommand(1);
    Common c;
    app.add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--index", c.index_dir, "Index directory");
    app.add_flag("-v,--verbose", c.verbose, "Debug logging");

    auto add_session_flags = [&](CLI::App* sub) {
        sub->add_option("--scripted", c.scripted, "Scripted reasoner responses (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--trace", c.trace, "Write the scouting trace here");
        sub->add_flag("--allow-stale", c.allow_stale, "Use an index older than the repository");
    };

    std::string root = ".";
    auto* index_cmd = app.add_subcommand("index", "Build and persist the index of a repository");
    index_cmd->add_option("path", root, "Repository root");

    std::string query;
    bool as_json = false;
    auto* locate_cmd = app.add_subcommand("locate", "Rank files relevant to a query");
    locate_cmd->add_option("query", query, "Question or task")->required();
    locate_cmd->add_option("--top-k", c.top_k, "Number of files to print")->check(CLI::PositiveNumber);
    locate_cmd->add_flag("--json", as_json, "Print the full JSON payload");
    add_session_flags(locate_cmd);

    auto* query_cmd = app.add_subcommand("query", "Raw hybrid retrieval, no reasoner");
    query_cmd->add_option("query", query, "Search text")->required();
    query_cmd->add_option("--top-k", c.top_k, "Number of hits")->check(CLI::PositiveNumber);
    query_cmd->add_flag("--allow-stale", c.allow_stale, "Use an index older than the repository");

    auto* answer_cmd = app.add_subcommand("answer", "Answer a question over the selected context");
    answer_cmd->add_option("query", query, "Question")->required();
    add_session_flags(answer_cmd);

    std::string host;
    int port = -1;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");
    serve_cmd->add_option("--scripted", c.scripted, "Scripted reasoner responses (JSON)")->check(CLI::ExistingFile);
    serve_cmd->add_flag("--allow-stale", c.allow_stale, "Use an index older than the repository");

    auto* stats_cmd = app.add_subcommand("stats", "Repository and index statistics");
    stats_cmd->add_flag("--allow-stale", c.allow_stale, "Use an index older than the repository");

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("reponav");
    spdlog::set_default_logger(logger);
    spdlog::set_level(c.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        auto cfg = load_config(c);
        if (*index_cmd) {
            auto dir = index_dir_for(c, cfg, default_index_dir(root));
            auto manifest = build_index(root, dir, cfg);
            fmt::print("{}\n", dir.string());
            for (const auto& [name, s] : manifest.sections) fmt::print("  {:<7} {} {}\n", name, s.sha256, s.file);
            fmt::print("snapshot {}\n", manifest.snapshot_hash);
        } else if (*locate_cmd) {
            auto engine = open_engine(c, cfg);
            auto out = engine.locate(query);
            if (as_json) {
                fmt::print("{}\n", out.payload.dump(2));
            } else {
                for (const auto& f : out.payload["files"])
                    fmt::print("{}\t{:.4f}\t{}\n", f["rank"].get<int>(), f["score"].get<double>(), f["path"].get<std::string>());
            }
        } else if (*query_cmd) {
            auto engine = open_engine(c, cfg);
            auto out = engine.query(query);
            for (const auto& h : out["hits"])
                fmt::print("{}\t{:.4f}\t{}\n", h["rank"].get<int>(), h["rel"].get<double>(), h["unit"].get<std::string>());
            if (out.contains("note")) spdlog::warn("{}", out["note"].get<std::string>());
        } else if (*answer_cmd) {
            auto engine = open_engine(c, cfg);
            auto out = engine.answer(query);
            fmt::print("{}\n", out.payload["answer"].get<std::string>());
        } else if (*serve_cmd) {
            auto dir = index_dir_for(c, cfg, default_index_dir("."));
            Service service(cfg, dir, c.allow_stale);
            if (!service.try_load()) spdlog::warn("no index at {}; POST /index to build one", dir.string());
            int bound = service.bind(host.empty() ? cfg.host : host, port >= 0 ? port : cfg.port);
            fmt::print("listening on {}:{}\n", host.empty() ? cfg.host : host, bound);
            std::fflush(stdout);
            g_service = &service;
            std::signal(SIGINT, [](int) { g_service->stop(); });
            std::signal(SIGTERM, [](int) { g_service->stop(); });
            service.listen();
        } else if (*stats_cmd) {
            auto engine = open_engine(c, cfg);
            fmt::print("{}\n", engine.stats().dump(2));
        }
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    }
    return kOk;
}
