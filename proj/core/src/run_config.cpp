#include "ragcal/run_config.hpp"

#include <algorithm>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

const std::vector<std::string> kEndpointRoles = {"embedder", "generator", "judge", "proposer", "taxonomy_judge"};

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown key '" + k + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::string tokenizer_name(const TokenizerSpec& t) { return t.kind == TokenizerKind::builtin ? "builtin" : "command"; }

}  // namespace

json endpoint_to_json(const ModelEndpoint& e) {
    return json{{"base_url", e.base_url}, {"api_key_env", e.api_key_env}, {"model", e.model_name}};
}

ModelEndpoint endpoint_from_json(const json& j, EndpointKind kind) {
    check_keys(j, {"base_url", "api_key_env", "model"}, "endpoint");
    ModelEndpoint e;
    e.kind = kind;
    read(j, "base_url", e.base_url, "endpoint");
    read(j, "api_key_env", e.api_key_env, "endpoint");
    read(j, "model", e.model_name, "endpoint");
    e.validate();
    return e;
}

void RunConfig::validate() const {
    chunking.validate();
    thresholds.validate();
    if (n_target == 0) throw ConfigError("generation.n_target must be >= 1");
    if (budget_multiplier == 0) throw ConfigError("generation.budget_multiplier must be >= 1");
    if (!(generation_temperature >= 0.0 && generation_temperature <= 2.0)) {
        throw ConfigError("generation.temperature must be in [0,2]");
    }
    if (k_retrieve == 0) throw ConfigError("rag.k_retrieve must be >= 1");
    if (k_values.empty()) throw ConfigError("rag.k_values must be non-empty");
    for (std::size_t k : k_values) {
        if (k == 0) throw ConfigError("rag.k_values entries must be >= 1");
    }
    if (!(failure_threshold > 0.0 && failure_threshold <= 1.0)) {
        throw ConfigError("analysis.failure_threshold must be in (0,1]");
    }
    if (relevance_questions == 0) throw ConfigError("rag.relevance_questions must be >= 1");
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (max_in_flight == 0) throw ConfigError("gateway.max_in_flight must be >= 1");
    if (max_attempts < 1) throw ConfigError("gateway.max_attempts must be >= 1");
    if (initial_backoff_ms < 0 || max_backoff_ms < 0 || timeout_s <= 0) {
        throw ConfigError("gateway timings must be non-negative");
    }
    if (embedding_batch_size == 0) throw ConfigError("gateway.embedding_batch_size must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
}

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path.lexically_normal();
    return (base_dir / path).lexically_normal();
}

ModelEndpoint RunConfig::endpoint(const std::string& role) const {
    auto it = endpoints.find(role);
    if (it == endpoints.end()) {
        if (role == "taxonomy_judge" && endpoints.count("judge") != 0) return endpoint("judge");
        if (role == "proposer" && endpoints.count("generator") != 0) return endpoint("generator");
        throw ConfigError("no '" + role + "' endpoint configured");
    }
    ModelEndpoint e = it->second;
    if (e.is_mock()) e.base_url = "mock:" + resolve(e.base_url.substr(5)).string();
    return e;
}

GatewayOptions RunConfig::gateway_options() const {
    GatewayOptions o;
    o.max_in_flight = max_in_flight;
    o.retry.max_attempts = max_attempts;
    o.retry.initial_backoff = std::chrono::milliseconds(initial_backoff_ms);
    o.retry.max_backoff = std::chrono::milliseconds(max_backoff_ms);
    if (!cache_dir.empty()) o.cache_dir = resolve(cache_dir);
    o.embedding_batch_size = embedding_batch_size;
    return o;
}

std::filesystem::path RunConfig::dataset_path() const {
    return dataset.empty() ? output_path() / "dataset.jsonl" : resolve(dataset);
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j,
               {"corpus", "chunking", "endpoints", "models", "dataset", "datasets", "thresholds", "generation", "rag",
                "analysis", "optimizer", "seed", "cache_dir", "output_dir", "workers", "gateway"},
               "config");
    RunConfig c;
    c.base_dir = base_dir;
    if (j.contains("corpus")) {
        if (j["corpus"].is_string()) {
            c.corpus = {j["corpus"].get<std::string>()};
        } else {
            read(j, "corpus", c.corpus, "config");
        }
    }
    if (j.contains("chunking")) {
        const auto& ch = j["chunking"];
        check_keys(ch, {"max_chunk_tokens", "overlap_tokens", "tokenizer", "tokenizer_command"}, "chunking");
        read(ch, "max_chunk_tokens", c.chunking.max_chunk_tokens, "chunking");
        read(ch, "overlap_tokens", c.chunking.overlap_tokens, "chunking");
        std::string tok = "builtin";
        read(ch, "tokenizer", tok, "chunking");
        if (tok == "command") {
            c.chunking.tokenizer.kind = TokenizerKind::external_command;
            read(ch, "tokenizer_command", c.chunking.tokenizer.command, "chunking");
            if (c.chunking.tokenizer.command.empty()) throw ConfigError("chunking.tokenizer_command is required");
        } else if (tok != "builtin") {
            throw ConfigError("chunking.tokenizer must be 'builtin' or 'command'");
        }
    }
    if (j.contains("endpoints")) {
        check_keys(j["endpoints"], kEndpointRoles, "endpoints");
        for (const auto& [role, e] : j["endpoints"].items()) {
            c.endpoints[role] = endpoint_from_json(e, role == "embedder" ? EndpointKind::embedding : EndpointKind::chat);
        }
    }
    if (j.contains("models")) {
        if (!j["models"].is_array()) throw ConfigError("models must be a list of endpoints");
        for (const auto& e : j["models"]) c.models.push_back(endpoint_from_json(e, EndpointKind::chat));
    }
    read(j, "dataset", c.dataset, "config");
    read(j, "datasets", c.datasets, "config");
    if (j.contains("thresholds")) {
        const auto& t = j["thresholds"];
        check_keys(t, {"answerability_min", "faithfulness_min", "relevance_min"}, "thresholds");
        read(t, "answerability_min", c.thresholds.answerability_min, "thresholds");
        read(t, "faithfulness_min", c.thresholds.faithfulness_min, "thresholds");
        read(t, "relevance_min", c.thresholds.relevance_min, "thresholds");
    }
    if (j.contains("generation")) {
        const auto& g = j["generation"];
        check_keys(g, {"n_target", "temperature", "budget_multiplier"}, "generation");
        read(g, "n_target", c.n_target, "generation");
        read(g, "temperature", c.generation_temperature, "generation");
        read(g, "budget_multiplier", c.budget_multiplier, "generation");
    }
    if (j.contains("rag")) {
        const auto& r = j["rag"];
        check_keys(r, {"k_retrieve", "k_values", "temperature", "correctness_program", "relevance_questions", "domain"},
                   "rag");
        read(r, "k_retrieve", c.k_retrieve, "rag");
        read(r, "k_values", c.k_values, "rag");
        read(r, "temperature", c.rag_temperature, "rag");
        read(r, "correctness_program", c.correctness_program, "rag");
        read(r, "relevance_questions", c.relevance_questions, "rag");
        read(r, "domain", c.domain, "rag");
    }
    if (j.contains("analysis")) {
        check_keys(j["analysis"], {"failure_threshold"}, "analysis");
        read(j["analysis"], "failure_threshold", c.failure_threshold, "analysis");
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        check_keys(o, {"breadth", "depth", "trials", "few_shot_k"}, "optimizer");
        read(o, "breadth", c.breadth, "optimizer");
        read(o, "depth", c.depth, "optimizer");
        read(o, "trials", c.trials, "optimizer");
        read(o, "few_shot_k", c.few_shot_k, "optimizer");
    }
    read(j, "seed", c.seed, "config");
    read(j, "cache_dir", c.cache_dir, "config");
    read(j, "output_dir", c.output_dir, "config");
    read(j, "workers", c.workers, "config");
    if (j.contains("gateway")) {
        const auto& g = j["gateway"];
        check_keys(g,
                   {"max_in_flight", "max_attempts", "initial_backoff_ms", "max_backoff_ms", "timeout_s",
                    "embedding_batch_size"},
                   "gateway");
        read(g, "max_in_flight", c.max_in_flight, "gateway");
        read(g, "max_attempts", c.max_attempts, "gateway");
        read(g, "initial_backoff_ms", c.initial_backoff_ms, "gateway");
        read(g, "max_backoff_ms", c.max_backoff_ms, "gateway");
        read(g, "timeout_s", c.timeout_s, "gateway");
        read(g, "embedding_batch_size", c.embedding_batch_size, "gateway");
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
    json endpoints = json::object();
    for (const auto& [role, e] : c.endpoints) endpoints[role] = endpoint_to_json(e);
    json models = json::array();
    for (const auto& e : c.models) models.push_back(endpoint_to_json(e));
    json chunking{{"max_chunk_tokens", c.chunking.max_chunk_tokens},
                  {"overlap_tokens", c.chunking.overlap_tokens},
                  {"tokenizer", tokenizer_name(c.chunking.tokenizer)}};
    if (c.chunking.tokenizer.kind == TokenizerKind::external_command) {
        chunking["tokenizer_command"] = c.chunking.tokenizer.command;
    }
    return json{{"corpus", c.corpus},
                {"chunking", chunking},
                {"endpoints", endpoints},
                {"models", models},
                {"dataset", c.dataset},
                {"datasets", c.datasets},
                {"thresholds",
                 {{"answerability_min", c.thresholds.answerability_min},
                  {"faithfulness_min", c.thresholds.faithfulness_min},
                  {"relevance_min", c.thresholds.relevance_min}}},
                {"generation",
                 {{"n_target", c.n_target},
                  {"temperature", c.generation_temperature},
                  {"budget_multiplier", c.budget_multiplier}}},
                {"rag",
                 {{"k_retrieve", c.k_retrieve},
                  {"k_values", c.k_values},
                  {"temperature", c.rag_temperature},
                  {"correctness_program", c.correctness_program},
                  {"relevance_questions", c.relevance_questions},
                  {"domain", c.domain}}},
                {"analysis", {{"failure_threshold", c.failure_threshold}}},
                {"optimizer",
                 {{"breadth", c.breadth}, {"depth", c.depth}, {"trials", c.trials}, {"few_shot_k", c.few_shot_k}}},
                {"seed", c.seed},
                {"cache_dir", c.cache_dir},
                {"output_dir", c.output_dir},
                {"workers", c.workers},
                {"gateway",
                 {{"max_in_flight", c.max_in_flight},
                  {"max_attempts", c.max_attempts},
                  {"initial_backoff_ms", c.initial_backoff_ms},
                  {"max_backoff_ms", c.max_backoff_ms},
                  {"timeout_s", c.timeout_s},
                  {"embedding_batch_size", c.embedding_batch_size}}}};
}

std::string config_digest(const RunConfig& cfg) { return json_digest(to_json(cfg)); }

}  // namespace ragcal
