#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragcal/corpus.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/judge_metrics.hpp"
#include "ragcal/qa_generation.hpp"
#include "ragcal/retrieval_metrics.hpp"
#include "ragcal/vector_index.hpp"

namespace ragcal {

struct RagConfig {
    ModelEndpoint embedder;
    ModelEndpoint generator;
    ModelEndpoint judge;
    std::size_t k_retrieve = 10;
    double generation_temperature = 0.0;
    PromptProgram correctness_program = answer_correctness_optimized();
    std::size_t relevance_questions = 3;
    std::size_t workers = 8;

    void validate() const;
};

/// Builds the index over every corpus chunk with the configured embedder.
VectorIndex build_corpus_index(const Corpus& corpus, ModelGateway& gateway, const ModelEndpoint& embedder);

RetrievalResult retrieve(const std::string& question, const std::string& query_id, const VectorIndex& index,
                         ModelGateway& gateway, const ModelEndpoint& embedder, std::size_t k);

/// Embeds every question in one batch and retrieves top-k for each.
std::vector<RetrievalResult> retrieve_dataset(const std::vector<QARecord>& dataset, const VectorIndex& index,
                                              ModelGateway& gateway, const ModelEndpoint& embedder, std::size_t k);

struct RagAnswer {
    std::string answer;
    RetrievalResult retrieval;
    std::vector<std::string> contexts;  ///< chunk texts in rank order
    std::string error;                  ///< set when generation failed

    bool ok() const { return error.empty(); }
};

/// Prompts the generator with the ranked chunks and the question.
RagAnswer generate_with_contexts(const std::string& question, RetrievalResult retrieval, const Corpus& corpus,
                                 ModelGateway& gateway, const RagConfig& cfg);

/// Embeds the question, retrieves top-k and generates an answer.
RagAnswer answer_with_rag(const std::string& question, const std::string& query_id, const VectorIndex& index,
                          const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg);

struct QuestionResult {
    std::string qa_id;
    std::string question;
    std::string ground_truth;
    std::string truth_chunk_id;
    RetrievalResult retrieval;
    std::optional<std::size_t> truth_rank;
    bool near_miss = false;  ///< truth missed, but an overlapping chunk of the same document was retrieved
    std::string answer;
    std::vector<std::string> contexts;
    std::optional<MetricScore> answer_correctness;
    std::optional<MetricScore> faithfulness;
    std::optional<MetricScore> answer_relevance;
    std::string error;
};

json to_json(const QuestionResult& q);
QuestionResult question_result_from_json(const json& j);

struct MetricAggregate {
    std::optional<double> mean;
    std::size_t scored = 0;
    std::size_t unscored = 0;
};

struct EvalRunResult {
    std::string label;
    std::size_t k = 0;
    std::vector<QuestionResult> questions;  ///< ordered by qa_id
    std::map<std::string, MetricAggregate> metrics;
    double recall_at_k = 0.0;
    double mrr_at_k = 0.0;
    std::size_t near_misses = 0;
    std::size_t failed_questions = 0;
};

json aggregates_to_json(const EvalRunResult& r);
std::string questions_jsonl(const EvalRunResult& r);
/// Rebuilds a run (aggregates recomputed) from a per-question JSONL file.
EvalRunResult load_eval_run(const std::filesystem::path& path, std::string label = {});

inline constexpr const char* kMetricAnswerCorrectness = "answer_correctness";
inline constexpr const char* kMetricFaithfulness = "faithfulness";
inline constexpr const char* kMetricAnswerRelevance = "answer_relevance";

/// Recomputes means and retrieval aggregates from the stored per-question
/// records.
void recompute_aggregates(EvalRunResult& run);

/// Answers and scores every QA. Per-question failures are counted and
/// excluded from the metric means.
EvalRunResult evaluate_run(const std::vector<QARecord>& dataset, const VectorIndex& index, const Corpus& corpus,
                           ModelGateway& gateway, const RagConfig& cfg);

/// Scores answers for precomputed retrievals (each truncated to `k`).
EvalRunResult evaluate_retrieved(const std::vector<QARecord>& dataset, const std::vector<RetrievalResult>& retrievals,
                                 std::size_t k, const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg);

/// One run per k; retrieval is done once at max(k) and truncated.
std::vector<EvalRunResult> ablate_chunk_count(const std::vector<QARecord>& dataset, const VectorIndex& index,
                                              const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg,
                                              const std::vector<std::size_t>& k_values);

/// "run,k,n,answer_correctness,faithfulness,answer_relevance,recall_at_k,mrr_at_k"
std::string aggregate_csv(const std::vector<EvalRunResult>& runs);
/// Rows metric x domain, columns k: "metric,domain,k=1,...".
std::string ablation_csv(const std::map<std::string, std::vector<EvalRunResult>>& by_domain);

/// The ten failure categories, in the order the taxonomy prompt lists them.
const std::vector<std::string>& failure_categories();

struct FailureLabel {
    std::string qa_id;
    double score = 0.0;
    std::vector<std::string> labels;
    std::string rationale;
    bool judge_failure = false;
    std::string raw_transcript;
};

/// Category names from a `failure_labels:` line, canonicalized. nullopt when
/// the line is missing or names an unknown category.
std::optional<std::vector<std::string>> parse_failure_labels(std::string_view raw);

struct FailureBucket {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    std::map<std::string, std::size_t> counts;
};

struct FailureAnalysis {
    double threshold = 1.0;
    std::vector<FailureLabel> labels;
    std::size_t n_scored = 0;          ///< QAs with an answer-correctness score
    std::size_t n_judge_failures = 0;  ///< excluded from the percentages
    std::size_t n_no_failures = 0;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> percentages;  ///< includes "No Failures"
    std::vector<FailureBucket> quartiles;       ///< [0,.25) [.25,.5) [.5,.75) [.75,1)
};

FailureAnalysis analyze_failures(const EvalRunResult& run, double threshold, const JudgeClient& judge,
                                 std::size_t workers = 8);

json to_json(const FailureAnalysis& a);
/// "category,side,count,percent" rows in taxonomy order, then No Failures.
std::string failure_counts_csv(const FailureAnalysis& a);
std::string failure_quartiles_csv(const FailureAnalysis& a);

struct SelfBiasCell {
    std::string evaluated_model;
    std::string metric;
    std::string dataset_origin;
    std::optional<double> score;
    bool best = false;  ///< unique maximum among origins for this model and metric
};

struct SelfBiasMatrix {
    std::vector<std::string> origins;
    std::vector<std::string> models;
    std::vector<SelfBiasCell> cells;
    /// "model/metric" pairs whose best origin is the model's own dataset.
    std::vector<std::string> self_preferred;
};

/// Builds the grid from finished runs, keyed [origin][model].
SelfBiasMatrix self_bias_from_runs(const std::vector<std::string>& origins, const std::vector<std::string>& models,
                                   const std::map<std::string, std::map<std::string, EvalRunResult>>& runs);

/// evaluate_run for every (dataset origin, evaluated model) pair.
SelfBiasMatrix self_bias_matrix(const std::map<std::string, std::vector<QARecord>>& datasets,
                                const std::vector<ModelEndpoint>& models, const VectorIndex& index,
                                const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg);

json to_json(const SelfBiasMatrix& m);
std::string self_bias_csv(const SelfBiasMatrix& m);

}  // namespace ragcal
