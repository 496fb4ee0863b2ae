#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragcal/judge_metrics.hpp"
#include "ragcal/prompt_program.hpp"

namespace ragcal {

/// Inputs keyed by prompt field name, plus the human label on the metric's
/// scale.
struct LabeledExample {
    std::map<std::string, std::string> inputs;
    double gold = 0.0;
};

json to_json(const LabeledExample& e);
LabeledExample labeled_example_from_json(const json& j);

struct BenchmarkSample {
    std::vector<LabeledExample> examples;
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
};

/// STS-B pairs from a TSV (or, by extension, CSV) file with a header naming
/// sentence1, sentence2 and score. sentence1 is the reference, sentence2 the
/// response; gold = score / 5. n = 0 keeps every valid row in file order;
/// otherwise n rows are drawn without replacement.
BenchmarkSample load_stsb(const std::filesystem::path& path, std::size_t n, std::uint64_t seed);

/// SQuAD 2.0 questions with their paragraph as context; gold = 1 unless the
/// question is marked impossible.
BenchmarkSample load_squad2(const std::filesystem::path& path, std::size_t n, std::uint64_t seed);

/// Pearson correlation of average ranks. Throws StatisticsError("zero
/// variance") when either list is constant.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);

/// Average ranks (1-based), ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& xs);

/// sqrt((1 + rho^2 / 2) / (n - 3)).
double bonett_wright_se(double rho_s, std::size_t n);

/// Fraction of unparsed scores above which an evaluation is not trusted.
inline constexpr double kMaxParseFailureRate = 0.2;

struct AlignmentReport {
    std::string metric_name;
    std::string judge_model;
    std::string program_digest;
    std::size_t n = 0;  ///< examples with a parsed score
    std::size_t n_total = 0;
    std::size_t parse_failures = 0;
    std::optional<double> rho_s;
    std::optional<double> se;
    bool valid = false;
    std::string invalid_reason;
    std::string note;
    std::vector<std::optional<double>> scores;  ///< per example, input order
};

json to_json(const AlignmentReport& r);

/// "| method | model | rho (SE se) |"
std::string markdown_row(const AlignmentReport& r, const std::string& method);
std::string markdown_header();

/// Scores every example with `program` and correlates the scores with gold.
AlignmentReport validate_metric_alignment(const PromptProgram& program, const std::vector<LabeledExample>& examples,
                                          const JudgeClient& judge, std::size_t workers = 8);

}  // namespace ragcal
