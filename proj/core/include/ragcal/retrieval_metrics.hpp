#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragcal/vector_index.hpp"

namespace ragcal {

struct RetrievalOutcome {
    std::string query_id;
    std::string truth_chunk_id;
    std::optional<std::size_t> rank;  ///< 1-based; absent when not retrieved
    std::size_t k = 0;                ///< retrieval depth the rank came from
};

/// 1-based position of `truth_chunk_id` in the ranked list, or nullopt.
std::optional<std::size_t> rank_of_truth(const RetrievalResult& result, std::string_view truth_chunk_id);

RetrievalOutcome make_outcome(const RetrievalResult& result, std::string truth_chunk_id);

/// Fraction of queries with rank <= k. Absent ranks count as misses.
/// Throws InvalidArgument on an empty list or when any outcome was retrieved
/// at a depth shallower than k.
double recall_at_k(const std::vector<RetrievalOutcome>& outcomes, std::size_t k);

/// Mean of 1/rank over queries, where ranks beyond k (or absent) contribute 0.
double mrr_at_k(const std::vector<RetrievalOutcome>& outcomes, std::size_t k);

}  // namespace ragcal
