#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace reponav {

/// Maps texts to fixed-dimension vectors. Throws Error(ProviderUnavailable) on failure.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

/// Deterministic vectors: a uniform pseudo-random vector seeded by the text's
/// SHA-256 digest, then normalized.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(int dim = 64) : dim_(dim) {}

    std::string id() const override { return "mock-sha256-" + std::to_string(dim_); }
    int dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    int dim_;
};

struct HttpEmbeddingConfig {
    std::string url;      ///< full endpoint URL, e.g. http://host:8080/embed
    std::string api_key;  ///< sent as a bearer token when non-empty
    std::string model;    ///< provider identity recorded in the manifest
    std::chrono::milliseconds timeout{10000};
    int max_attempts = 2;
    std::size_t batch_size = 32;
};

/// POSTs {"texts": [...]} and expects {"vectors": [[...]]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);

    std::string id() const override;
    int dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts);

    HttpEmbeddingConfig config_;
    int dim_ = 0;
};

/// Reads EMBED_URL / EMBED_API_KEY; returns null when EMBED_URL is unset.
std::unique_ptr<EmbeddingProvider> embedding_provider_from_env();

}  // namespace reponav
