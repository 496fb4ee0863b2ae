#include "ragcal/retrieval_metrics.hpp"

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

void check_outcomes(const std::vector<RetrievalOutcome>& outcomes, std::size_t k, const char* who) {
    if (outcomes.empty()) throw InvalidArgument(std::string(who) + ": empty outcome list");
    if (k == 0) throw InvalidArgument(std::string(who) + ": k must be >= 1");
    for (const auto& o : outcomes) {
        if (o.k < k) {
            throw InvalidArgument(std::string(who) + ": query " + o.query_id + " retrieved only " +
                                  std::to_string(o.k) + " deep, cannot score at k=" + std::to_string(k));
        }
    }
}

}  // namespace

std::optional<std::size_t> rank_of_truth(const RetrievalResult& result, std::string_view truth_chunk_id) {
    for (std::size_t i = 0; i < result.ranked.size(); ++i) {
        if (result.ranked[i].chunk_id == truth_chunk_id) return i + 1;
    }
    return std::nullopt;
}

RetrievalOutcome make_outcome(const RetrievalResult& result, std::string truth_chunk_id) {
    RetrievalOutcome o;
    o.query_id = result.query_id;
    o.rank = rank_of_truth(result, truth_chunk_id);
    o.truth_chunk_id = std::move(truth_chunk_id);
    o.k = result.k;
    return o;
}

double recall_at_k(const std::vector<RetrievalOutcome>& outcomes, std::size_t k) {
    check_outcomes(outcomes, k, "recall_at_k");
    std::size_t hits = 0;
    for (const auto& o : outcomes) {
        if (o.rank && *o.rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

double mrr_at_k(const std::vector<RetrievalOutcome>& outcomes, std::size_t k) {
    check_outcomes(outcomes, k, "mrr_at_k");
    double sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.rank && *o.rank <= k) sum += 1.0 / static_cast<double>(*o.rank);
    }
    return sum / static_cast<double>(outcomes.size());
}

}  // namespace ragcal
