#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "reponav/config.hpp"
#include "reponav/engine.hpp"

namespace httplib {
class Server;
}

namespace reponav {

inline constexpr const char* kIndexFormatHeader = "X-Index-Format";

struct ServiceResponse {
    int status = 200;
    nlohmann::ordered_json body;
};

/// HTTP front end over one Engine. Reads run concurrently; /index is exclusive.
class Service {
public:
    Service(AppConfig config, std::filesystem::path index_dir, bool allow_stale = false);
    ~Service();

    /// Loads an existing index if one is present; returns false otherwise.
    bool try_load();

    /// Transport-free dispatch used by the HTTP handlers.
    ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body);

    /// Binds and returns the port (0 picks a free one).
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    std::shared_ptr<Engine> engine() const;
    ServiceResponse do_index(const nlohmann::json& req);

    AppConfig config_;
    std::filesystem::path index_dir_;
    bool allow_stale_;
    mutable std::shared_mutex engine_mutex_;
    std::shared_ptr<Engine> engine_;
    std::mutex index_mutex_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace reponav
