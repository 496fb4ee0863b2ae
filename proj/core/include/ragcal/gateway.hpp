#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragcal/util.hpp"

namespace ragcal {

enum class EndpointKind { chat, embedding };

/// One model behind an OpenAI-compatible API. The key itself never lives in
/// configuration; only the name of the environment variable holding it.
struct ModelEndpoint {
    std::string base_url;
    std::string api_key_env;
    std::string model_name;
    EndpointKind kind = EndpointKind::chat;

    void validate() const;
    bool is_mock() const { return base_url.rfind("mock:", 0) == 0; }
};

struct ChatMessage {
    std::string role;
    std::string content;
};

enum class CallPurpose { generation, judge };

struct ChatRequest {
    std::string model_name;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::optional<std::int64_t> seed;
    /// Judge calls are rejected unless temperature is exactly 0.
    CallPurpose purpose = CallPurpose::generation;

    /// The fields that identify a request for caching (no wall-clock data).
    json canonical() const;
};

ChatRequest make_judge_request(std::string model_name, std::string prompt, int max_output_tokens = 512);

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct TranscriptRecord {
    std::string request_hash;
    std::string response_text;
    double latency_ms = 0.0;
    TokenUsage usage;
    bool cache_hit = false;
    int attempts = 0;
};

struct ChatResponse {
    std::string text;
    TranscriptRecord transcript;
};

struct HttpRequest {
    std::string base_url;
    std::string path;  ///< "/chat/completions" or "/embeddings"
    std::string api_key;
    json body;
};

struct HttpResponse {
    int status = 0;  ///< 0 means the connection itself failed
    std::string body;
    std::string error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Real HTTP(S) transport backed by cpp-httplib.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(120));
    HttpResponse post(const HttpRequest& request) override;

private:
    std::chrono::seconds timeout_;
};

/// Content-addressed response store: an in-memory map, optionally mirrored to
/// a directory of `<sha256>.json` files. Readers run concurrently; writers are
/// serialized.
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

    std::optional<json> get(const std::string& key) const;
    void put(const std::string& key, const json& entry);
    std::size_t size() const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, json> memory_;
    std::mutex write_mu_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};
};

struct GatewayOptions {
    RetryPolicy retry;
    std::size_t max_in_flight = 16;
    std::optional<std::filesystem::path> cache_dir;
    std::size_t embedding_batch_size = 64;
};

struct GatewayStats {
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t http_calls = 0;
    std::uint64_t retries = 0;
};

json to_json(const GatewayStats& s);

/// Every chat and embedding call in the toolkit goes through here.
class ModelGateway {
public:
    ModelGateway(std::shared_ptr<Transport> transport, GatewayOptions options = {});

    ChatResponse chat_complete(const ModelEndpoint& endpoint, const ChatRequest& request);

    /// One vector per input, in input order. Cached per (model, text).
    std::vector<std::vector<double>> embed_texts(const std::vector<std::string>& texts,
                                                 const ModelEndpoint& endpoint);

    GatewayStats stats() const;
    const GatewayOptions& options() const noexcept { return options_; }

private:
    HttpResponse post_with_retry(const HttpRequest& request, int& attempts);
    std::string resolve_key(const ModelEndpoint& endpoint) const;

    std::shared_ptr<Transport> transport_;
    GatewayOptions options_;
    ResponseCache cache_;
    std::counting_semaphore<4096> in_flight_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> http_calls_{0};
    std::atomic<std::uint64_t> retries_{0};
};

/// Sends `mock:<script>` endpoints to a MockTransport loaded from that script
/// and everything else to the HTTP transport.
class RoutingTransport : public Transport {
public:
    explicit RoutingTransport(std::shared_ptr<Transport> http);
    HttpResponse post(const HttpRequest& request) override;

private:
    std::shared_ptr<Transport> http_;
    std::mutex mu_;
    std::unordered_map<std::string, std::shared_ptr<Transport>> mocks_;
};

}  // namespace ragcal
