#include "reponav/hybrid_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "reponav/embedding.hpp"
#include "reponav/error.hpp"
#include "reponav/parallel.hpp"

namespace reponav {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower_or_digit(char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void split_word(std::string_view word, std::vector<std::string>& out) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < word.size()) {
        while (i < word.size() && word[i] == '_') ++i;
        std::size_t j = i;
        while (j < word.size() && word[j] != '_') ++j;
        std::string_view piece = word.substr(i, j - i);
        std::size_t start = 0;
        for (std::size_t p = 1; p < piece.size(); ++p) {
            bool boundary = (is_lower_or_digit(piece[p - 1]) && is_upper(piece[p])) ||
                            (is_upper(piece[p - 1]) && is_upper(piece[p]) && p + 1 < piece.size() &&
                             std::islower(static_cast<unsigned char>(piece[p + 1])));
            if (boundary) {
                parts.push_back(lower(piece.substr(start, p - start)));
                start = p;
            }
        }
        if (start < piece.size()) parts.push_back(lower(piece.substr(start)));
        i = j;
    }
    std::string compound = lower(word);
    if (parts.empty()) return;
    bool single = parts.size() == 1 && parts[0] == compound;
    for (auto& p : parts) out.push_back(std::move(p));
    if (!single) out.push_back(std::move(compound));
}

std::vector<RankedHit> top_k(std::vector<RankedHit> hits, std::size_t k) {
    std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.unit < b.unit;
    });
    if (hits.size() > k) hits.resize(k);
    for (std::size_t r = 0; r < hits.size(); ++r) hits[r].rank = static_cast<int>(r + 1);
    return hits;
}

}  // namespace

std::string_view to_string(HitSource source) {
    switch (source) {
        case HitSource::Sparse: return "sparse";
        case HitSource::Dense: return "dense";
        case HitSource::Fused: return "fused";
    }
    return "unknown";
}

std::vector<std::string> tokenize_code(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_char(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && is_word_char(text[j])) ++j;
        if (j > i) split_word(text.substr(i, j - i), out);
        i = j;
    }
    return out;
}

std::string unit_index_text(const CodeUnit& unit, const std::vector<std::string>& file_lines) {
    std::string text = unit.signature;
    if (unit.docstring) {
        text += '\n';
        text += *unit.docstring;
    }
    int first = std::max(unit.header_end + 1, unit.span.start);
    for (int line = first; line <= unit.span.end && line <= static_cast<int>(file_lines.size()); ++line) {
        if (unit.kind != UnitKind::Documentation && unit.doc_span && unit.doc_span->contains(line)) continue;
        text += '\n';
        text += file_lines[static_cast<std::size_t>(line - 1)];
    }
    return text;
}

std::vector<IndexDocument> collect_documents(const RepoModel& model, const std::set<UnitKind>& kinds) {
    const auto& files = model.snapshot().files;
    std::vector<std::vector<IndexDocument>> per_file(files.size());
    parallel_for(files.size(), [&](std::size_t f) {
        auto units = model.units_of_file(files[f].path);
        bool wanted = std::any_of(units.begin(), units.end(), [&](const CodeUnit* u) { return kinds.count(u->kind) > 0; });
        if (!wanted) return;
        auto lines = read_lines(model.absolute(files[f].path), LineSpan{1, files[f].line_count});
        for (const CodeUnit* u : units) {
            if (kinds.count(u->kind)) per_file[f].push_back({u->id, unit_index_text(*u, lines)});
        }
    });
    std::vector<IndexDocument> docs;
    for (auto& part : per_file) std::move(part.begin(), part.end(), std::back_inserter(docs));
    return docs;
}

SparseIndex build_sparse_index(const std::vector<IndexDocument>& docs, std::set<UnitKind> granularity) {
    std::vector<std::vector<std::string>> tokens(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { tokens[i] = tokenize_code(docs[i].text); });

    SparseIndex index;
    index.granularity = std::move(granularity);
    std::size_t total = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::map<std::string, int> tf;
        for (const auto& t : tokens[i]) ++tf[t];
        for (auto& [term, n] : tf) index.postings[term].push_back({docs[i].unit, n});
        index.doc_lengths[docs[i].unit] = static_cast<int>(tokens[i].size());
        total += tokens[i].size();
    }
    for (auto& [term, list] : index.postings) std::sort(list.begin(), list.end());
    index.doc_count = index.doc_lengths.size();
    index.avg_doc_length = index.doc_count == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(index.doc_count);
    return index;
}

double bm25_idf(std::size_t doc_count, std::size_t df) {
    double n = static_cast<double>(doc_count);
    double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<RankedHit> sparse_query(const SparseIndex& index, const std::vector<std::string>& terms, std::size_t k,
                                    Bm25Params params) {
    std::set<std::string> unique(terms.begin(), terms.end());
    std::map<UnitId, double> scores;
    for (const auto& term : unique) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        double idf = bm25_idf(index.doc_count, it->second.size());
        for (const auto& p : it->second) {
            double dl = index.doc_lengths.at(p.unit);
            double norm = index.avg_doc_length > 0 ? dl / index.avg_doc_length : 0.0;
            double tf = p.tf;
            scores[p.unit] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
        }
    }
    std::vector<RankedHit> hits;
    hits.reserve(scores.size());
    for (auto& [unit, score] : scores) hits.push_back({unit, score, HitSource::Sparse, 0});
    return top_k(std::move(hits), k);
}

DenseIndex embed_and_store(const std::vector<IndexDocument>& docs, EmbeddingProvider& provider) {
    DenseIndex index;
    index.provider_id = provider.id();
    index.dim = provider.dim();
    if (docs.empty()) {
        index.vectors.resize(0, index.dim);
        return index;
    }
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(d.text);
    auto vectors = provider.embed(texts);
    if (vectors.size() != docs.size()) throw Error(ErrorCode::ProviderUnavailable, "vector count mismatch");
    index.dim = provider.dim();
    index.vectors.resize(static_cast<Eigen::Index>(docs.size()), index.dim);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (static_cast<int>(vectors[i].size()) != index.dim)
            throw Error(ErrorCode::ProviderUnavailable, "inconsistent vector dimension");
        Eigen::Map<const Eigen::VectorXd> v(vectors[i].data(), index.dim);
        double norm = v.norm();
        auto row = static_cast<Eigen::Index>(i);
        if (norm > 0) {
            index.vectors.row(row) = v.transpose() / norm;
        } else {
            index.vectors.row(row).setZero();
        }
        index.units.push_back(docs[i].unit);
    }
    return index;
}

std::vector<RankedHit> dense_query(const DenseIndex& index, const Eigen::VectorXd& query, std::size_t k) {
    if (index.empty() || query.size() != index.dim) return {};
    Eigen::VectorXd q = query;
    double norm = q.norm();
    if (norm > 0) q /= norm;
    Eigen::VectorXd scores = index.vectors * q;
    std::vector<RankedHit> hits;
    hits.reserve(index.units.size());
    for (std::size_t i = 0; i < index.units.size(); ++i)
        hits.push_back({index.units[i], scores(static_cast<Eigen::Index>(i)), HitSource::Dense, 0});
    return top_k(std::move(hits), k);
}

std::vector<RankedHit> fuse(const std::vector<RankedHit>& sparse, const std::vector<RankedHit>& dense, std::size_t k) {
    std::map<UnitId, double> scores;
    for (const auto* list : {&sparse, &dense})
        for (const auto& h : *list) scores[h.unit] += 1.0 / (kRrfConstant + h.rank);
    std::vector<RankedHit> hits;
    for (auto& [unit, score] : scores) hits.push_back({unit, score, HitSource::Fused, 0});
    return top_k(std::move(hits), k);
}

std::map<UnitId, double> normalized_relevance(const std::vector<RankedHit>& fused) {
    std::map<UnitId, double> rel;
    double best = 0.0;
    for (const auto& h : fused) best = std::max(best, h.score);
    if (best <= 0) return rel;
    for (const auto& h : fused) rel[h.unit] = h.score / best;
    return rel;
}

HybridIndex build_hybrid_index(const RepoModel& model, EmbeddingProvider* provider) {
    std::set<UnitKind> file_kinds{UnitKind::File, UnitKind::Documentation};
    std::set<UnitKind> symbol_kinds{UnitKind::Class, UnitKind::Function};
    auto docs = collect_documents(model, {UnitKind::File, UnitKind::Documentation, UnitKind::Class, UnitKind::Function});

    std::vector<IndexDocument> file_docs, symbol_docs;
    for (const auto& d : docs) {
        auto kind = model.at(d.unit).kind;
        (file_kinds.count(kind) ? file_docs : symbol_docs).push_back(d);
    }
    HybridIndex index;
    index.file_level = build_sparse_index(file_docs, file_kinds);
    index.symbol_level = build_sparse_index(symbol_docs, symbol_kinds);
    if (provider) index.dense = embed_and_store(docs, *provider);
    return index;
}

std::vector<RankedHit> sparse_search(const HybridIndex& index, const std::vector<std::string>& terms, std::size_t k) {
    auto hits = sparse_query(index.file_level, terms, k);
    auto symbol = sparse_query(index.symbol_level, terms, k);
    hits.insert(hits.end(), symbol.begin(), symbol.end());
    return top_k(std::move(hits), k);
}

HybridResult hybrid_search(const HybridIndex& index, const std::vector<std::string>& terms, const std::string& dense_text,
                           EmbeddingProvider* provider, std::size_t k) {
    HybridResult result;
    result.sparse = sparse_search(index, terms, k);
    if (!index.dense || index.dense->empty()) {
        result.dense_note = "dense index unavailable";
    } else if (!provider || provider->id() != index.dense->provider_id) {
        result.dense_note = "embedding provider unavailable";
    } else {
        try {
            auto vec = provider->embed({dense_text});
            if (vec.size() == 1 && static_cast<int>(vec[0].size()) == index.dense->dim) {
                Eigen::Map<const Eigen::VectorXd> q(vec[0].data(), index.dense->dim);
                result.dense = dense_query(*index.dense, q, k);
            } else {
                result.dense_note = "embedding provider returned a malformed vector";
            }
        } catch (const Error& e) {
            result.dense_note = std::string("embedding provider unavailable: ") + e.what();
        }
    }
    result.fused = fuse(result.sparse, result.dense, k);
    result.relevance = normalized_relevance(result.fused);
    return result;
}

}  // namespace reponav
