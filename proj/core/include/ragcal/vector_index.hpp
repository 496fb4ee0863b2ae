#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ragcal/util.hpp"

namespace ragcal {

struct IndexEntry {
    std::string chunk_id;
    std::vector<double> vector;
    double norm = 0.0;
};

struct ScoredChunk {
    std::string chunk_id;
    double score = 0.0;
};

struct RetrievalResult {
    std::string query_id;
    std::vector<ScoredChunk> ranked;  ///< non-increasing score, ties by ascending chunk_id
    std::size_t k = 0;
};

/// Exact cosine index. Immutable once built, so concurrent queries are safe.
class VectorIndex {
public:
    VectorIndex() = default;

    /// Throws InvalidArgument on length mismatch, ragged dimensions or a
    /// zero-norm vector (naming the offending chunk).
    static VectorIndex build(std::vector<std::string> chunk_ids, std::vector<std::vector<double>> embeddings);

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t dimension() const noexcept { return dim_; }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }

    /// Cosine scores are rounded to 12 decimal places before ranking, so
    /// mathematically equal scores tie exactly and fall back to chunk_id order.
    RetrievalResult query_top_k(std::span<const double> query, std::size_t k, std::string query_id = {}) const;

    static constexpr double kScoreScale = 1e12;

    std::string dump_jsonl() const;
    static VectorIndex load_jsonl(const std::filesystem::path& path);

private:
    std::vector<IndexEntry> entries_;
    std::size_t dim_ = 0;
};

double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
/// Cosine similarity; both vectors must be non-zero and of equal length.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

json to_json(const RetrievalResult& r);

}  // namespace ragcal
