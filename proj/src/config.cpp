#include "reponav/config.hpp"

#include <fstream>
#include <set>

#include "reponav/error.hpp"

namespace reponav {

namespace {

/// Reads known keys from one object and rejects the rest.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw Error(ErrorCode::ConfigError, name_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::ConfigError, fmt_key(key) + " has the wrong type");
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        known_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        get(key, v);
        out = std::move(v);
    }

    void get_ms(const char* key, std::chrono::milliseconds& out) {
        long long ms = out.count();
        get(key, ms);
        if (ms <= 0) throw Error(ErrorCode::ConfigError, fmt_key(key) + " must be positive");
        out = std::chrono::milliseconds(ms);
    }

    std::optional<Section> sub(const char* key) {
        known_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Section(j_.at(key), fmt_key(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!known_.count(key)) throw Error(ErrorCode::ConfigError, "unknown key " + fmt_key(key));
    }

private:
    std::string fmt_key(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> known_;
};

EmbeddingChoice parse_choice(const std::string& s) {
    if (s == "none") return EmbeddingChoice::None;
    if (s == "mock") return EmbeddingChoice::Mock;
    if (s == "http") return EmbeddingChoice::Http;
    if (s == "env") return EmbeddingChoice::Env;
    throw Error(ErrorCode::ConfigError, "embedding.provider must be none, mock, http or env");
}

const char* choice_name(EmbeddingChoice c) {
    switch (c) {
        case EmbeddingChoice::None: return "none";
        case EmbeddingChoice::Mock: return "mock";
        case EmbeddingChoice::Http: return "http";
        case EmbeddingChoice::Env: return "env";
    }
    return "none";
}

}  // namespace

AppConfig AppConfig::from_json(const nlohmann::json& j) {
    AppConfig cfg;
    Section root(j, "");
    if (auto b = root.sub("budget")) {
        auto& bc = cfg.budget;
        b->get("c", bc.c);
        b->get("B_min", bc.b_min);
        b->get("tau", bc.tau);
        b->get("epsilon", bc.epsilon);
        b->get("patience", bc.patience);
        b->get("T", bc.horizon);
        b->get("w1", bc.w1);
        b->get("w2", bc.w2);
        b->get("w3", bc.w3);
        b->get("k", bc.k);
        b->finish();
    }
    root.get("index_dir", cfg.index_dir);
    if (auto s = root.sub("scan")) {
        s->get("include", cfg.scan.include_globs);
        s->get("exclude", cfg.scan.exclude_globs);
        s->finish();
    }
    if (auto e = root.sub("embedding")) {
        std::string provider = choice_name(cfg.embedding.provider);
        e->get("provider", provider);
        cfg.embedding.provider = parse_choice(provider);
        e->get("mock_dim", cfg.embedding.mock_dim);
        e->get("url", cfg.embedding.http.url);
        e->get("api_key", cfg.embedding.http.api_key);
        e->get("model", cfg.embedding.http.model);
        e->get_ms("timeout_ms", cfg.embedding.http.timeout);
        e->get("max_attempts", cfg.embedding.http.max_attempts);
        e->get("batch_size", cfg.embedding.http.batch_size);
        e->finish();
        if (cfg.embedding.mock_dim <= 0) throw Error(ErrorCode::ConfigError, "embedding.mock_dim must be positive");
        if (cfg.embedding.provider == EmbeddingChoice::Http && cfg.embedding.http.url.empty())
            throw Error(ErrorCode::ConfigError, "embedding.url is required for the http provider");
    }
    if (auto r = root.sub("reasoner")) {
        r->get("scripted", cfg.reasoner.scripted);
        r->get("url", cfg.reasoner.http.url);
        r->get("model", cfg.reasoner.http.model);
        r->get("api_key", cfg.reasoner.http.api_key);
        r->get_ms("timeout_ms", cfg.reasoner.http.timeout);
        r->get("max_attempts", cfg.reasoner.max_attempts);
        r->finish();
        if (cfg.reasoner.max_attempts < 1) throw Error(ErrorCode::ConfigError, "reasoner.max_attempts must be >= 1");
    }
    if (auto t = root.sub("tools")) {
        t->get("max_entries", cfg.tools.max_entries);
        t->get("max_matches", cfg.tools.max_matches);
        t->finish();
    }
    root.get("working_set_cap", cfg.working_set_cap);
    root.get("top_k", cfg.top_k);
    root.get("trace", cfg.trace_path);
    if (auto s = root.sub("service")) {
        s->get("host", cfg.host);
        s->get("port", cfg.port);
        s->finish();
    }
    root.finish();
    cfg.budget.validate();
    if (cfg.working_set_cap == 0) throw Error(ErrorCode::ConfigError, "working_set_cap must be positive");
    return cfg;
}

AppConfig AppConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json AppConfig::to_json() const {
    const auto& b = budget;
    nlohmann::ordered_json j;
    j["budget"] = {{"c", b.c},         {"B_min", b.b_min}, {"tau", b.tau}, {"epsilon", b.epsilon},
                   {"patience", b.patience}, {"T", b.horizon}, {"w1", b.w1},   {"w2", b.w2},
                   {"w3", b.w3},       {"k", b.k}};
    j["index_dir"] = index_dir ? nlohmann::ordered_json(*index_dir) : nlohmann::ordered_json(nullptr);
    j["scan"] = {{"include", scan.include_globs}, {"exclude", scan.exclude_globs}};
    j["embedding"] = {{"provider", choice_name(embedding.provider)},
                      {"mock_dim", embedding.mock_dim},
                      {"url", embedding.http.url},
                      {"model", embedding.http.model},
                      {"timeout_ms", embedding.http.timeout.count()},
                      {"max_attempts", embedding.http.max_attempts},
                      {"batch_size", embedding.http.batch_size}};
    j["reasoner"] = {{"scripted", reasoner.scripted ? nlohmann::ordered_json(*reasoner.scripted) : nlohmann::ordered_json(nullptr)},
                     {"url", reasoner.http.url},
                     {"model", reasoner.http.model},
                     {"timeout_ms", reasoner.http.timeout.count()},
                     {"max_attempts", reasoner.max_attempts}};
    j["tools"] = {{"max_entries", tools.max_entries}, {"max_matches", tools.max_matches}};
    j["working_set_cap"] = working_set_cap;
    j["top_k"] = top_k;
    j["trace"] = trace_path ? nlohmann::ordered_json(*trace_path) : nlohmann::ordered_json(nullptr);
    j["service"] = {{"host", host}, {"port", port}};
    return j;
}

nlohmann::ordered_json config_echo(const AppConfig& cfg) {
    auto full = cfg.to_json();
    nlohmann::ordered_json j;
    j["scan"] = full["scan"];
    j["embedding"] = {{"provider", full["embedding"]["provider"]}, {"mock_dim", cfg.embedding.mock_dim}};
    return j;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& settings) {
    switch (settings.provider) {
        case EmbeddingChoice::None: return nullptr;
        case EmbeddingChoice::Mock: return std::make_unique<MockEmbeddingProvider>(settings.mock_dim);
        case EmbeddingChoice::Http: return std::make_unique<HttpEmbeddingProvider>(settings.http);
        case EmbeddingChoice::Env: return embedding_provider_from_env();
    }
    return nullptr;
}

}  // namespace reponav
