#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragcal/corpus.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/qa_generation.hpp"

namespace ragcal {

/// Everything one CLI invocation needs. Loaded from a JSON file; unknown keys
/// are rejected at every level. Relative paths resolve against the config
/// file's directory.
struct RunConfig {
    std::filesystem::path base_dir;

    std::vector<std::string> corpus;
    ChunkingConfig chunking;

    std::map<std::string, ModelEndpoint> endpoints;  ///< embedder, generator, judge, proposer, taxonomy_judge
    std::vector<ModelEndpoint> models;               ///< evaluated generators for self-bias runs
    std::string dataset;                             ///< QA dataset JSONL; defaults to <output_dir>/dataset.jsonl
    std::map<std::string, std::string> datasets;     ///< dataset origin -> JSONL, for self-bias runs

    FilterThresholds thresholds;
    std::size_t n_target = 100;
    double generation_temperature = 0.7;
    std::size_t budget_multiplier = 10;

    std::size_t k_retrieve = 10;
    std::vector<std::size_t> k_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    double rag_temperature = 0.0;
    std::string correctness_program = "optimized";
    std::size_t relevance_questions = 3;
    std::string domain = "default";
    double failure_threshold = 1.0;

    std::size_t breadth = 4;
    std::size_t depth = 3;
    std::size_t trials = 20;
    std::size_t few_shot_k = 8;

    std::uint64_t seed = 0;
    std::string cache_dir;
    std::string output_dir = "ragcal-out";
    std::size_t workers = 8;

    std::size_t max_in_flight = 16;
    int max_attempts = 5;
    long initial_backoff_ms = 500;
    long max_backoff_ms = 30000;
    long timeout_s = 120;
    std::size_t embedding_batch_size = 64;

    /// Throws ConfigError on any inconsistent value.
    void validate() const;

    std::filesystem::path resolve(const std::string& p) const;
    /// Named endpoint with mock script paths resolved; ConfigError if absent.
    ModelEndpoint endpoint(const std::string& role) const;
    bool has_endpoint(const std::string& role) const { return endpoints.count(role) != 0; }
    GatewayOptions gateway_options() const;
    std::filesystem::path output_path() const { return resolve(output_dir); }
    std::filesystem::path dataset_path() const;
};

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Effective configuration (defaults filled in) in canonical JSON form.
json to_json(const RunConfig& cfg);
/// SHA-256 of the effective configuration.
std::string config_digest(const RunConfig& cfg);

json endpoint_to_json(const ModelEndpoint& e);
ModelEndpoint endpoint_from_json(const json& j, EndpointKind kind);

}  // namespace ragcal
