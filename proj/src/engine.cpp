#include "reponav/engine.hpp"

#include <fstream>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reponav/error.hpp"

namespace reponav {

namespace fs = std::filesystem;

fs::path default_index_dir(const fs::path& root) { return root / ".reponav"; }

IndexManifest build_index(const fs::path& root, const fs::path& index_dir, const AppConfig& config) {
    PythonGrammar grammar;
    auto model = build_repo_model(root, config.scan, grammar);
    auto graph = build_relation_graph(model);
    auto provider = make_embedding_provider(config.embedding);
    auto index = build_hybrid_index(model, provider.get());
    auto manifest = save_index(index_dir, model, graph, index, config_echo(config));
    spdlog::info(R"({{"event":"index_built","files":{},"units":{},"edges":{},"snapshot":"{}"}})",
                 model.snapshot().files.size(), model.units().size(), graph.edges().size(), manifest.snapshot_hash);
    return manifest;
}

struct Engine::Scouted {
    ScoutResult result;
    ContextPack pack;
    std::vector<std::string> prompts;
};

Engine::Engine(AppConfig config, LoadedIndex index) : config_(std::move(config)), index_(std::move(index)) {
    if (config_.reasoner.scripted) script_ = nlohmann::json::parse(std::ifstream(*config_.reasoner.scripted));
    if (!index_.index.dense) return;
    provider_ = make_embedding_provider(config_.embedding);
    if (!provider_) {
        provider_note_ = "no embedding provider configured; dense stream skipped";
    } else if (provider_->id() != index_.index.dense->provider_id) {
        provider_note_ = fmt::format("embedding provider {} does not match index provider {}; dense stream skipped",
                                     provider_->id(), index_.index.dense->provider_id);
        provider_.reset();
    }
}

void Engine::set_script(nlohmann::json script) {
    ScriptedBackend::from_json(script);
    script_ = std::move(script);
}

std::unique_ptr<ReasonerBackend> Engine::make_backend() const {
    if (script_) return ScriptedBackend::from_json(*script_);
    if (!config_.reasoner.http.url.empty()) return std::make_unique<HttpReasonerBackend>(config_.reasoner.http);
    if (auto env = reasoner_backend_from_env(config_.reasoner.http.timeout)) return env;
    return std::make_unique<NullBackend>();
}

void Engine::book(const TokenLedger& session) {
    for (auto& r : session.records()) ledger_.append(std::move(r));
}

void Engine::write_trace(const nlohmann::ordered_json& trace) const {
    if (!config_.trace_path) return;
    std::ofstream out(*config_.trace_path, std::ios::trunc);
    out << trace.dump(2) << '\n';
    if (!out) spdlog::warn("cannot write trace to {}", *config_.trace_path);
}

Engine::Scouted Engine::scout(const std::string& query, ReasonerBackend& backend, TokenLedger& ledger) {
    Reasoner reasoner(backend, ledger, config_.reasoner.max_attempts);
    ScoutEnv env{index_.model, index_.index, index_.graph, provider_.get(), config_.budget, config_.tools,
                 config_.working_set_cap};
    Scouted s;
    s.result = run_scout(query, env, reasoner);
    if (provider_note_) s.result.trace["notes"] = nlohmann::ordered_json::array({*provider_note_});
    s.pack = select_context(index_.model, s.result.prioritized(config_.budget, index_.model), s.result.state.budget);
    s.prompts = reasoner.prompts();
    return s;
}

nlohmann::ordered_json to_json(const ContextPack& pack, bool with_bodies) {
    auto units = nlohmann::ordered_json::array();
    for (const auto& u : pack.units) {
        nlohmann::ordered_json j;
        j["unit"] = u.unit.value;
        j["path"] = u.path;
        j["start"] = u.span.start;
        j["end"] = u.span.end;
        j["priority"] = u.priority;
        j["truncated"] = u.truncated;
        if (with_bodies) j["body"] = u.body;
        units.push_back(std::move(j));
    }
    auto omitted = nlohmann::ordered_json::array();
    for (const auto& id : pack.omitted) omitted.push_back(id.value);
    return {{"budget", pack.budget}, {"total_lines", pack.total_lines}, {"units", units}, {"omitted", omitted}};
}

namespace {

nlohmann::ordered_json token_totals(const std::vector<LedgerRecord>& records) {
    TokenTotals t;
    for (const auto& r : records) {
        t.prompt_tokens += r.prompt_tokens;
        t.completion_tokens += r.completion_tokens;
        ++t.calls;
    }
    return {{"calls", t.calls}, {"prompt", t.prompt_tokens}, {"completion", t.completion_tokens}, {"total", t.total()}};
}

std::string render_context(const ContextPack& pack) {
    std::string out;
    for (const auto& u : pack.units)
        out += fmt::format("### {} ({}:{}-{})\n{}\n", u.unit.value, u.path, u.span.start, u.span.end, u.body);
    return out;
}

}  // namespace

SessionOutcome Engine::locate(const std::string& query, std::optional<std::size_t> top_k) {
    auto backend = make_backend();
    TokenLedger session;
    auto s = scout(query, *backend, session);
    std::size_t k = top_k.value_or(config_.top_k);

    auto files = nlohmann::ordered_json::array();
    std::map<std::string, std::size_t> slot;
    for (const auto& u : s.pack.units) {
        auto [it, fresh] = slot.try_emplace(u.path, files.size());
        if (fresh) {
            if (files.size() >= k) {
                slot.erase(it);
                continue;
            }
            files.push_back({{"rank", files.size() + 1}, {"path", u.path}, {"score", u.priority},
                             {"units", nlohmann::ordered_json::array()}});
        }
        auto& f = files[it->second];
        f["score"] = std::max(f["score"].get<double>(), u.priority);
        f["units"].push_back(u.unit.value);
    }

    SessionOutcome out;
    auto& p = out.payload;
    p["snapshot_hash"] = snapshot_hash();
    p["query"] = query;
    p["top_k"] = k;
    p["files"] = files;
    p["context"] = to_json(s.pack, false);
    p["terminal_reason"] = std::string(to_string(s.result.terminal_reason));
    p["rounds"] = s.result.trace["rounds"].size();
    p["tokens"] = token_totals(session.records());
    out.trace = std::move(s.result.trace);
    out.ledger = session.records();
    out.prompts = std::move(s.prompts);
    out.tool_outputs = std::move(s.result.tool_outputs);
    book(session);
    write_trace(out.trace);
    return out;
}

SessionOutcome Engine::context(const std::string& query) {
    auto backend = make_backend();
    TokenLedger session;
    auto s = scout(query, *backend, session);
    SessionOutcome out;
    out.payload["snapshot_hash"] = snapshot_hash();
    out.payload["query"] = query;
    out.payload["terminal_reason"] = std::string(to_string(s.result.terminal_reason));
    out.payload["pack"] = to_json(s.pack, true);
    out.trace = std::move(s.result.trace);
    out.ledger = session.records();
    out.prompts = std::move(s.prompts);
    out.tool_outputs = std::move(s.result.tool_outputs);
    book(session);
    write_trace(out.trace);
    return out;
}

SessionOutcome Engine::answer(const std::string& query) {
    auto backend = make_backend();
    TokenLedger session;
    auto s = scout(query, *backend, session);
    Reasoner reasoner(*backend, session, config_.reasoner.max_attempts);
    ReasonerRequest req;
    req.role = Role::Answer;
    req.payload["query"] = query;
    req.payload["context"] = render_context(s.pack);
    SessionOutcome out;
    try {
        auto text = reasoner.request(req);
        out.payload["answer"] = text.get<std::string>();
    } catch (const Error&) {
        book(session);
        throw;
    }
    out.payload["snapshot_hash"] = snapshot_hash();
    out.payload["query"] = query;
    out.payload["context"] = to_json(s.pack, false);
    out.payload["tokens"] = token_totals(session.records());
    out.trace = std::move(s.result.trace);
    out.ledger = session.records();
    out.prompts = std::move(s.prompts);
    book(session);
    write_trace(out.trace);
    return out;
}

nlohmann::ordered_json Engine::query(const std::string& query, std::optional<std::size_t> top_k) const {
    std::size_t k = top_k.value_or(config_.top_k);
    auto r = hybrid_search(index_.index, tokenize_code(query), query, provider_.get(), k);
    auto hits = nlohmann::ordered_json::array();
    for (const auto& h : r.fused) {
        const auto& u = index_.model.at(h.unit);
        hits.push_back({{"rank", h.rank},
                        {"unit", h.unit.value},
                        {"path", u.path},
                        {"kind", to_string(u.kind)},
                        {"score", h.score},
                        {"rel", r.relevance.at(h.unit)}});
    }
    nlohmann::ordered_json out;
    out["snapshot_hash"] = snapshot_hash();
    out["query"] = query;
    out["hits"] = hits;
    if (r.dense_note) out["note"] = *r.dense_note;
    return out;
}

nlohmann::ordered_json Engine::stats() const {
    const auto& model = index_.model;
    auto rs = compute_repo_stats(model.snapshot(), model.units());
    nlohmann::ordered_json units;
    for (const auto& [kind, n] : rs.unit_counts) units[std::string(to_string(kind))] = n;
    nlohmann::ordered_json out;
    out["snapshot_hash"] = snapshot_hash();
    out["repo"] = {{"root", index_.manifest.root},
                   {"files", rs.file_count},
                   {"mean_dir_depth", rs.mean_dir_depth},
                   {"total_lines", rs.total_lines},
                   {"units", units},
                   {"entropy", repo_entropy(rs)},
                   {"edges", index_.graph.edges().size()},
                   {"unresolved", index_.graph.unresolved().size()}};
    out["index"] = index_.manifest.to_json();
    out["ledger"] = ledger_report(ledger_.records(), default_price_table()).to_json();
    return out;
}

}  // namespace reponav
