#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragcal/gateway.hpp"
#include "ragcal/prompt_program.hpp"

namespace ragcal {

struct ParsedValue {
    std::optional<double> value;
    bool clamped = false;
    std::string error;  ///< set when value is absent

    bool ok() const { return value.has_value(); }
};

/// Reads the number after the last `output_field:` (case-insensitive).
/// Unit-interval values are clamped into [0, 1]; binary values must be 0 or 1.
ParsedValue parse_judge_output(std::string_view raw, std::string_view output_field, Scale scale);

struct MetricScore {
    std::string metric_name;
    std::optional<double> value;  ///< present iff parse_ok
    std::string judge_model;
    std::string raw_transcript;
    bool parse_ok = false;
    bool clamped = false;
    std::string error;
    json details = json::object();
};

json to_json(const MetricScore& s);
MetricScore metric_score_from_json(const json& j);

/// The judge side of a scorer: a gateway and the chat endpoint it talks to.
struct JudgeClient {
    ModelGateway* gateway = nullptr;
    ModelEndpoint endpoint;
};

/// Renders `program` over `inputs`, calls the judge at temperature 0 and
/// parses the output field. One re-ask on a parse failure. Transport and
/// protocol failures come back as unscored records.
MetricScore score_with_program(const PromptProgram& program, const std::map<std::string, std::string>& inputs,
                               const JudgeClient& judge);

MetricScore score_answer_correctness(std::string_view generated, std::string_view reference,
                                     const PromptProgram& program, const JudgeClient& judge);

MetricScore score_answerability(std::string_view question, std::string_view context, const PromptProgram& program,
                                const JudgeClient& judge);

/// supported statements / extracted statements.
MetricScore score_faithfulness(std::string_view answer, const std::vector<std::string>& contexts,
                               const JudgeClient& judge);

/// Mean cosine between the question and `n` questions generated from the
/// answer, clamped to [0, 1].
MetricScore score_answer_relevance(std::string_view answer, std::string_view question, const JudgeClient& judge,
                                   const ModelEndpoint& embedder, std::size_t n = 3);

/// Lines of the form "<prefix>: text", in order, with the prefix stripped.
std::vector<std::string> parse_prefixed_lines(std::string_view raw, std::string_view prefix);

}  // namespace ragcal
