#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reponav/repo_model.hpp"

namespace reponav {

class EmbeddingProvider;

/// Splits on non-identifier characters, then snake_case and camelCase.
/// Emits lowercased sub-tokens followed by the lowercased compound.
std::vector<std::string> tokenize_code(std::string_view text);

struct Posting {
    UnitId unit;
    int tf = 0;

    auto operator<=>(const Posting&) const = default;
};

struct SparseIndex {
    std::map<std::string, std::vector<Posting>> postings;  ///< per term, sorted by unit
    std::map<UnitId, int> doc_lengths;
    double avg_doc_length = 0.0;
    std::size_t doc_count = 0;
    std::set<UnitKind> granularity;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

enum class HitSource { Sparse, Dense, Fused };

std::string_view to_string(HitSource source);

struct RankedHit {
    UnitId unit;
    double score = 0.0;
    HitSource source = HitSource::Sparse;
    int rank = 0;
};

struct IndexDocument {
    UnitId unit;
    std::string text;
};

/// Signature, docstring and body of a unit, the text both indices see.
std::string unit_index_text(const CodeUnit& unit, const std::vector<std::string>& file_lines);

/// Index documents for all units of the given kinds, in model order.
std::vector<IndexDocument> collect_documents(const RepoModel& model, const std::set<UnitKind>& kinds);

SparseIndex build_sparse_index(const std::vector<IndexDocument>& docs, std::set<UnitKind> granularity);
double bm25_idf(std::size_t doc_count, std::size_t df);
std::vector<RankedHit> sparse_query(const SparseIndex& index, const std::vector<std::string>& terms, std::size_t k,
                                    Bm25Params params = {});

struct DenseIndex {
    std::vector<UnitId> units;
    Eigen::MatrixXd vectors;  ///< one unit-normalized row per unit
    int dim = 0;
    std::string provider_id;

    bool empty() const noexcept { return units.empty(); }
};

/// Throws ProviderUnavailable when the provider fails.
DenseIndex embed_and_store(const std::vector<IndexDocument>& docs, EmbeddingProvider& provider);
std::vector<RankedHit> dense_query(const DenseIndex& index, const Eigen::VectorXd& query, std::size_t k);

/// Reciprocal-rank fusion with constant 60; scores are the raw RRF sums.
std::vector<RankedHit> fuse(const std::vector<RankedHit>& sparse, const std::vector<RankedHit>& dense, std::size_t k);
constexpr double kRrfConstant = 60.0;

/// Rel(u): fused scores divided by the best fused score.
std::map<UnitId, double> normalized_relevance(const std::vector<RankedHit>& fused);

/// File-level and symbol-level sparse sub-indices plus an optional dense index.
struct HybridIndex {
    SparseIndex file_level;    ///< File and Documentation units
    SparseIndex symbol_level;  ///< Class and Function units
    std::optional<DenseIndex> dense;
};

struct HybridResult {
    std::vector<RankedHit> sparse;
    std::vector<RankedHit> dense;
    std::vector<RankedHit> fused;
    std::map<UnitId, double> relevance;
    std::optional<std::string> dense_note;  ///< set when the dense stream was skipped
};

HybridIndex build_hybrid_index(const RepoModel& model, EmbeddingProvider* provider);

/// Queries both sparse sub-indices and merges them by score.
std::vector<RankedHit> sparse_search(const HybridIndex& index, const std::vector<std::string>& terms, std::size_t k);

/// Full retrieval stream: sparse over `terms`, dense over `dense_text`, fused.
HybridResult hybrid_search(const HybridIndex& index, const std::vector<std::string>& terms, const std::string& dense_text,
                           EmbeddingProvider* provider, std::size_t k);

}  // namespace reponav
