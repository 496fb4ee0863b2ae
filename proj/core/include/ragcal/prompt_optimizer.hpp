#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ragcal/alignment.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/judge_metrics.hpp"
#include "ragcal/prompt_program.hpp"

namespace ragcal {

inline constexpr std::size_t kMinEvaluationExamples = 10;

struct EvaluationResult {
    bool valid = false;
    std::optional<double> score;  ///< Spearman rho against gold; absent when invalid
    std::string invalid_reason;
    std::size_t n = 0;
    std::size_t parse_failures = 0;
};

/// Alignment of `program` with the gold labels. Needs at least 10 examples.
/// Invalid on more than 20% parse failures or a constant score vector.
EvaluationResult evaluate_program(const PromptProgram& program, const std::vector<LabeledExample>& examples,
                                  const JudgeClient& judge, std::size_t workers = 8);

/// Appends k examples, drawn without replacement, as demos in sampled order.
PromptProgram labeled_few_shot(const PromptProgram& program, const std::vector<LabeledExample>& labeled,
                               std::size_t k, std::uint64_t seed);

/// The model that writes instruction candidates.
struct ProposerClient {
    ModelGateway* gateway = nullptr;
    ModelEndpoint endpoint;
    double temperature = 0.7;
};

struct TraceCandidate {
    std::size_t round = 0;  ///< 0 for the seed program (COPRO) or the trial index (mipro_lite)
    std::string digest;
    std::string instruction;  ///< also kept for rejected proposals
    std::size_t n_demos = 0;
    std::optional<double> train_score;
    std::string status;  ///< "scored", "invalid: ...", "rejected: ...", "proposer failure: ..."
};

struct OptimizationTrace {
    std::string optimizer;
    std::vector<TraceCandidate> candidates;
    /// Best train score after the seed and after each round or trial.
    std::vector<std::optional<double>> best_so_far;
    PromptProgram best_program;
    std::optional<double> best_train_score;
    EvaluationResult validation;
    std::size_t iterations = 0;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
};

json to_json(const OptimizationTrace& t);

struct CoproOptions {
    std::size_t breadth = 4;
    std::size_t depth = 3;
    std::uint64_t seed = 0;
    std::size_t workers = 8;
};

/// Coordinate ascent over the instruction: each round the proposer writes
/// `breadth` rewrites of the current best; the best moves only on a strict
/// improvement in train alignment. The final best is scored on `val`.
OptimizationTrace copro_optimize(const PromptProgram& program, const std::vector<LabeledExample>& train,
                                 const std::vector<LabeledExample>& val, const JudgeClient& judge,
                                 const ProposerClient& proposer, const CoproOptions& options);

struct MiproOptions {
    std::size_t trials = 20;
    std::vector<std::size_t> demo_sizes{0, 2, 4, 8};
    std::uint64_t seed = 0;
    std::size_t workers = 8;
};

/// Random search over (proposed instruction, demo subset) pairs. Each trial
/// is scored on train; the first best trial is re-scored on `val`.
OptimizationTrace mipro_lite(const PromptProgram& program, const std::vector<LabeledExample>& train,
                             const std::vector<LabeledExample>& val, const JudgeClient& judge,
                             const ProposerClient& proposer, const MiproOptions& options);

}  // namespace ragcal
