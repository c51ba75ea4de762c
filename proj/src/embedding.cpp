#include "reponav/embedding.hpp"

#include <cmath>
#include <cstdlib>
#include <random>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "reponav/digest.hpp"
#include "reponav/error.hpp"

namespace reponav {

std::vector<std::vector<double>> MockEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        auto digest = sha256(text);
        std::uint64_t seed = 0;
        for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(digest[static_cast<std::size_t>(i)]) << (8 * i);
        std::mt19937_64 rng(seed);
        std::vector<double> v(static_cast<std::size_t>(dim_));
        double norm = 0.0;
        for (auto& x : v) {
            x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

struct UrlParts {
    std::string origin;  ///< scheme://host[:port]
    std::string path;
};

UrlParts split_url(const std::string& url) {
    auto scheme = url.find("://");
    auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {}

std::string HttpEmbeddingProvider::id() const {
    return "http:" + (config_.model.empty() ? config_.url : config_.model);
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += config_.batch_size) {
        std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                       texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), i + config_.batch_size)));
        auto vectors = embed_batch(batch);
        std::move(vectors.begin(), vectors.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    auto [origin, path] = split_url(config_.url);
    httplib::Client client(origin);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    std::string body = nlohmann::json{{"texts", texts}}.dump();

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < std::max(1, config_.max_attempts); ++attempt) {
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            auto vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
            if (vectors.size() != texts.size()) throw std::runtime_error("vector count mismatch");
            for (const auto& v : vectors) {
                if (v.empty() || (dim_ != 0 && static_cast<int>(v.size()) != dim_))
                    throw std::runtime_error("inconsistent vector dimension");
                dim_ = static_cast<int>(v.size());
            }
            return vectors;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    spdlog::warn(R"({{"event":"embedding_failed","url":"{}","reason":"{}"}})", config_.url, last_error);
    throw Error(ErrorCode::ProviderUnavailable, last_error);
}

std::unique_ptr<EmbeddingProvider> embedding_provider_from_env() {
    const char* url = std::getenv("EMBED_URL");
    if (!url || !*url) return nullptr;
    HttpEmbeddingConfig cfg;
    cfg.url = url;
    if (const char* key = std::getenv("EMBED_API_KEY")) cfg.api_key = key;
    return std::make_unique<HttpEmbeddingProvider>(std::move(cfg));
}

}  // namespace reponav
