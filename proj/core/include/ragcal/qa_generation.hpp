#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragcal/corpus.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/judge_metrics.hpp"

namespace ragcal {

struct FilterThresholds {
    double answerability_min = 1.0;
    double faithfulness_min = 0.8;
    double relevance_min = 0.8;

    /// answerability_min must be 0 or 1; the others in [0, 1].
    void validate() const;
};

struct FilterScores {
    double answerability = 0.0;
    double faithfulness = 0.0;
    double answer_relevance = 0.0;
};

struct QARecord {
    std::string qa_id;
    std::string question;
    std::string answer;
    std::string chunk_id;
    FilterScores filter_scores;
    std::string generator_model;
    std::size_t attempt_index = 0;
};

json to_json(const QARecord& r);
QARecord qa_record_from_json(const json& j);
std::vector<QARecord> load_qa_dataset(const std::filesystem::path& path);

/// Rejection reasons used as keys of GenerationStats::rejected_by_metric.
inline constexpr const char* kRejectAnswerability = "answerability";
inline constexpr const char* kRejectFaithfulness = "faithfulness";
inline constexpr const char* kRejectRelevance = "answer_relevance";
inline constexpr const char* kRejectJudgeFailure = "judge-failure";
inline constexpr const char* kRejectGeneration = "generation";

struct GenerationStats {
    std::size_t requested = 0;
    std::size_t attempts = 0;
    std::size_t accepted = 0;
    std::map<std::string, std::size_t> rejected_by_metric;
    double wall_seconds = 0.0;
    double samples_per_minute = 0.0;
    bool budget_exhausted = false;

    std::size_t total_rejected() const;
};

json to_json(const GenerationStats& s);

/// Models and knobs for one generation run.
struct QAGenerationConfig {
    ModelEndpoint generator;
    ModelEndpoint judge;
    ModelEndpoint embedder;
    FilterThresholds thresholds;
    PromptProgram answerability_program = answerability_handcrafted();
    double generation_temperature = 0.7;
    std::size_t budget_multiplier = 10;
    std::size_t workers = 4;
    std::size_t relevance_questions = 3;
};

/// Uniform draws without replacement until every chunk has been used once,
/// then with replacement. Deterministic in `seed`.
std::vector<Chunk> sample_contexts(const Corpus& corpus, long long n, std::uint64_t seed);

/// One question from the user persona, checked once for being specific and
/// unambiguous and regenerated once if the check fails. nullopt when the
/// generator keeps returning nothing.
std::optional<std::string> generate_question(const Chunk& chunk, ModelGateway& gateway,
                                             const QAGenerationConfig& cfg, std::uint64_t seed);

/// Answer from the subject-matter-expert persona. nullopt when empty twice.
std::optional<std::string> generate_answer(const std::string& question, const Chunk& chunk, ModelGateway& gateway,
                                           const QAGenerationConfig& cfg, std::uint64_t seed);

struct ValidationOutcome {
    bool accepted = false;
    std::string reason;  ///< empty when accepted
    FilterScores scores;
    std::vector<MetricScore> metric_scores;
};

/// Answerability, then faithfulness, then answer relevance; stops at the
/// first metric below its threshold.
ValidationOutcome validate_candidate(const std::string& question, const std::string& answer, const Chunk& chunk,
                                     ModelGateway& gateway, const QAGenerationConfig& cfg);

struct GenerationResult {
    std::vector<QARecord> records;
    GenerationStats stats;
    std::vector<std::string> warnings;
};

GenerationResult generate_dataset(const Corpus& corpus, std::size_t n_target, ModelGateway& gateway,
                                  const QAGenerationConfig& cfg, std::uint64_t seed);

}  // namespace ragcal
