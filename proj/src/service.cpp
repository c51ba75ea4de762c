#include "reponav/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "reponav/error.hpp"

namespace reponav {

namespace fs = std::filesystem;

namespace {

ServiceResponse error_response(int status, std::string_view code, const std::string& message) {
    return {status, {{"error", code}, {"message", message}}};
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::IndexMissing:
        case ErrorCode::StaleIndex: return 409;
        case ErrorCode::ReasonerUnavailable:
        case ErrorCode::MalformedAfterRetry:
        case ErrorCode::ProviderUnavailable: return 502;
        case ErrorCode::RootNotFound:
        case ErrorCode::InvalidRequest:
        case ErrorCode::ConfigError:
        case ErrorCode::PathOutsideSnapshot:
        case ErrorCode::PathNotFound:
        case ErrorCode::InvalidPattern: return 400;
        default: return 500;
    }
}

/// Exclusive lock file next to the index; removed on destruction.
class LockFile {
public:
    explicit LockFile(fs::path path) : path_(std::move(path)) {
        fs::create_directories(path_.parent_path());
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    }
    ~LockFile() {
        if (fd_ >= 0) {
            ::close(fd_);
            fs::remove(path_);
        }
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

    bool held() const noexcept { return fd_ >= 0; }

private:
    fs::path path_;
    int fd_ = -1;
};

std::string require_query(const nlohmann::json& req) {
    if (!req.contains("query") || !req["query"].is_string() || req["query"].get<std::string>().empty())
        throw Error(ErrorCode::InvalidRequest, "body needs a non-empty string field query");
    return req["query"];
}

std::optional<std::size_t> optional_top_k(const nlohmann::json& req) {
    if (!req.contains("top_k") || req["top_k"].is_null()) return std::nullopt;
    if (!req["top_k"].is_number_unsigned() || req["top_k"].get<std::size_t>() == 0)
        throw Error(ErrorCode::InvalidRequest, "top_k must be a positive integer");
    return req["top_k"].get<std::size_t>();
}

}  // namespace

Service::Service(AppConfig config, fs::path index_dir, bool allow_stale)
    : config_(std::move(config)), index_dir_(std::move(index_dir)), allow_stale_(allow_stale) {}

Service::~Service() = default;

std::shared_ptr<Engine> Service::engine() const {
    std::shared_lock lock(engine_mutex_);
    return engine_;
}

bool Service::try_load() {
    if (!index_exists(index_dir_)) return false;
    PythonGrammar grammar;
    auto loaded = load_index(index_dir_, grammar, {allow_stale_});
    auto e = std::make_shared<Engine>(config_, std::move(loaded));
    std::unique_lock lock(engine_mutex_);
    engine_ = std::move(e);
    return true;
}

ServiceResponse Service::do_index(const nlohmann::json& req) {
    if (!req.contains("path") || !req["path"].is_string())
        throw Error(ErrorCode::InvalidRequest, "body needs a string field path");
    fs::path root = req["path"].get<std::string>();
    std::unique_lock guard(index_mutex_, std::try_to_lock);
    if (!guard.owns_lock()) return error_response(409, "IndexBusy", "an index build is already running");
    LockFile lock(index_dir_ / "index.lock");
    if (!lock.held()) return error_response(409, "IndexBusy", "index directory is locked by another process");
    auto manifest = build_index(root, index_dir_, config_);
    PythonGrammar grammar;
    auto e = std::make_shared<Engine>(config_, load_index(index_dir_, grammar, {true}));
    {
        std::unique_lock lk(engine_mutex_);
        engine_ = std::move(e);
    }
    return {200, {{"snapshot_hash", manifest.snapshot_hash}, {"manifest", manifest.to_json()}}};
}

ServiceResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
        nlohmann::json req = nlohmann::json::object();
        if (method == "POST") {
            try {
                req = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
            } catch (const nlohmann::json::exception&) {
                throw Error(ErrorCode::InvalidRequest, "body is not JSON");
            }
            if (!req.is_object()) throw Error(ErrorCode::InvalidRequest, "body must be a JSON object");
        }
        if (method == "POST" && path == "/index") return do_index(req);

        auto e = engine();
        bool known = (method == "POST" && (path == "/locate" || path == "/context" || path == "/answer")) ||
                     (method == "GET" && path == "/stats");
        if (!known) return error_response(404, "NotFound", method + " " + path);
        if (!e) return error_response(409, "IndexMissing", "no index loaded; POST /index first");

        if (path == "/stats") return {200, e->stats()};
        auto query = require_query(req);
        if (path == "/locate") return {200, e->locate(query, optional_top_k(req)).payload};
        if (path == "/context") return {200, e->context(query).payload};
        return {200, e->answer(query).payload};
    } catch (const Error& err) {
        return error_response(status_for(err.code()), to_string(err.code()), err.what());
    } catch (const std::exception& err) {
        return error_response(500, "Internal", err.what());
    }
}

int Service::bind(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        auto r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_header(kIndexFormatHeader, std::to_string(kIndexFormatVersion));
        if (auto e = engine(); e && !r.body.contains("snapshot_hash")) r.body["snapshot_hash"] = e->snapshot_hash();
        res.set_content(r.body.dump(), "application/json");
        spdlog::info(R"({{"event":"request","method":"{}","path":"{}","status":{}}})", req.method, req.path, r.status);
    };
    for (const char* p : {"/index", "/locate", "/context", "/answer"}) server_->Post(p, route);
    server_->Get("/stats", route);
    server_->set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        auto r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_header(kIndexFormatHeader, std::to_string(kIndexFormatVersion));
        res.set_content(r.body.dump(), "application/json");
    });
    if (port == 0) return server_->bind_to_any_port(host);
    if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::ConfigError, fmt::format("cannot bind {}:{}", host, port));
    return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
    if (server_) server_->stop();
}

}  // namespace reponav
