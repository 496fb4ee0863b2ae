#include "ragcal/vector_index.hpp"

#include <algorithm>
#include <cmath>

#include "ragcal/errors.hpp"

namespace ragcal {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: dimension mismatch");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_similarity: zero vector");
    return dot(a, b) / (na * nb);
}

VectorIndex VectorIndex::build(std::vector<std::string> chunk_ids, std::vector<std::vector<double>> embeddings) {
    if (chunk_ids.size() != embeddings.size()) {
        throw InvalidArgument("build_index: " + std::to_string(chunk_ids.size()) + " chunks but " +
                              std::to_string(embeddings.size()) + " embeddings");
    }
    VectorIndex idx;
    idx.entries_.reserve(chunk_ids.size());
    for (std::size_t i = 0; i < chunk_ids.size(); ++i) {
        if (i == 0) {
            idx.dim_ = embeddings[i].size();
        } else if (embeddings[i].size() != idx.dim_) {
            throw InvalidArgument("build_index: dimension mismatch at chunk " + chunk_ids[i]);
        }
        const double norm = l2_norm(embeddings[i]);
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw InvalidArgument("build_index: zero-norm vector for chunk " + chunk_ids[i]);
        }
        idx.entries_.push_back(IndexEntry{std::move(chunk_ids[i]), std::move(embeddings[i]), norm});
    }
    return idx;
}

RetrievalResult VectorIndex::query_top_k(std::span<const double> query, std::size_t k, std::string query_id) const {
    if (k == 0) throw InvalidArgument("query_top_k: k must be >= 1");
    if (!entries_.empty() && query.size() != dim_) {
        throw InvalidArgument("query_top_k: query dimension " + std::to_string(query.size()) + " != index dimension " +
                              std::to_string(dim_));
    }
    const double qnorm = l2_norm(query);
    if (!(qnorm > 0.0)) throw InvalidArgument("query_top_k: zero query vector");

    std::vector<ScoredChunk> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) {
        const double cos = dot(query, e.vector) / (qnorm * e.norm);
        scored.push_back({e.chunk_id, std::round(cos * kScoreScale) / kScoreScale});
    }

    const std::size_t take = std::min(k, scored.size());
    auto better = [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    scored.resize(take);
    return RetrievalResult{std::move(query_id), std::move(scored), k};
}

std::string VectorIndex::dump_jsonl() const {
    std::vector<json> rows;
    rows.reserve(entries_.size());
    for (const auto& e : entries_) rows.push_back({{"chunk_id", e.chunk_id}, {"vector", e.vector}, {"norm", e.norm}});
    return to_jsonl(rows);
}

VectorIndex VectorIndex::load_jsonl(const std::filesystem::path& path) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vecs;
    for (const auto& row : read_jsonl(path)) {
        ids.push_back(row.at("chunk_id").get<std::string>());
        vecs.push_back(row.at("vector").get<std::vector<double>>());
    }
    // Norms are recomputed rather than trusted from the file.
    return build(std::move(ids), std::move(vecs));
}

json to_json(const RetrievalResult& r) {
    json ranked = json::array();
    for (const auto& s : r.ranked) ranked.push_back({{"chunk_id", s.chunk_id}, {"score", s.score}});
    return json{{"query_id", r.query_id}, {"k", r.k}, {"ranked", ranked}};
}

}  // namespace ragcal
