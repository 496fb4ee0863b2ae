#include "ragcal/gateway.hpp"

#include <cstdlib>
#include <thread>
#include <unordered_set>

#include "ragcal/errors.hpp"
#include "ragcal/mock_transport.hpp"

namespace ragcal {
namespace {

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

struct SemaphoreGuard {
    std::counting_semaphore<4096>& sem;
    explicit SemaphoreGuard(std::counting_semaphore<4096>& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
};

json parse_body(const std::string& body, const char* what) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed ") + what + " response body: " + e.what());
    }
}

}  // namespace

void ModelEndpoint::validate() const {
    if (model_name.empty()) throw ConfigError("endpoint model_name must be non-empty");
    if (base_url.empty()) throw ConfigError("endpoint base_url must be non-empty (model " + model_name + ")");
}

json ChatRequest::canonical() const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json j{{"kind", "chat"},
           {"model", model_name},
           {"messages", msgs},
           {"temperature", temperature},
           {"max_tokens", max_output_tokens}};
    if (seed) j["seed"] = *seed;
    return j;
}

ChatRequest make_judge_request(std::string model_name, std::string prompt, int max_output_tokens) {
    ChatRequest r;
    r.model_name = std::move(model_name);
    r.messages.push_back({"user", std::move(prompt)});
    r.temperature = 0.0;
    r.max_output_tokens = max_output_tokens;
    r.purpose = CallPurpose::judge;
    return r;
}

json to_json(const GatewayStats& s) {
    return json{{"cache_hits", s.cache_hits},
                {"cache_misses", s.cache_misses},
                {"http_calls", s.http_calls},
                {"retries", s.retries}};
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<json> ResponseCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mu_);
        auto it = memory_.find(key);
        if (it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / (key + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    json entry;
    try {
        entry = json::parse(read_file(path));
    } catch (const std::exception&) {
        return std::nullopt;  // a corrupt entry is just a miss
    }
    std::unique_lock lock(mu_);
    memory_.emplace(key, entry);
    return entry;
}

void ResponseCache::put(const std::string& key, const json& entry) {
    std::lock_guard wlock(write_mu_);
    {
        std::unique_lock lock(mu_);
        memory_[key] = entry;
    }
    if (dir_) write_file_atomic(*dir_ / (key + ".json"), entry.dump(2, ' ', false, json::error_handler_t::replace));
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mu_);
    return memory_.size();
}

// ---------------------------------------------------------------------------

ModelGateway::ModelGateway(std::shared_ptr<Transport> transport, GatewayOptions options)
    : transport_(std::move(transport)),
      options_(std::move(options)),
      cache_(options_.cache_dir),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, std::min<std::size_t>(options_.max_in_flight, 4096)))) {
    if (!transport_) throw InvalidArgument("gateway needs a transport");
    if (options_.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
}

std::string ModelGateway::resolve_key(const ModelEndpoint& endpoint) const {
    if (endpoint.api_key_env.empty() || endpoint.is_mock()) return {};
    const char* v = std::getenv(endpoint.api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
        throw ConfigError("environment variable " + endpoint.api_key_env + " is not set (model " +
                          endpoint.model_name + ")");
    }
    return v;
}

HttpResponse ModelGateway::post_with_retry(const HttpRequest& request, int& attempts) {
    auto backoff = options_.retry.initial_backoff;
    HttpResponse last;
    for (attempts = 1; attempts <= options_.retry.max_attempts; ++attempts) {
        {
            SemaphoreGuard guard(in_flight_);
            ++http_calls_;
            try {
                last = transport_->post(request);
            } catch (const std::exception& e) {
                last = HttpResponse{0, {}, e.what()};
            }
        }
        if (last.status == 200) return last;
        if (!retryable(last.status)) {
            throw TransportError("HTTP " + std::to_string(last.status) + " from " + request.base_url + request.path +
                                     (last.error.empty() ? "" : ": " + last.error),
                                 last.status, attempts);
        }
        if (attempts < options_.retry.max_attempts) {
            ++retries_;
            if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
            backoff = std::min(options_.retry.max_backoff,
                               std::chrono::milliseconds(static_cast<std::int64_t>(
                                   static_cast<double>(backoff.count()) * options_.retry.multiplier)));
        }
    }
    attempts = options_.retry.max_attempts;
    throw TransportError("retries exhausted after " + std::to_string(attempts) + " attempts (last status " +
                             std::to_string(last.status) + (last.error.empty() ? "" : ", " + last.error) + ")",
                         last.status, attempts);
}

ChatResponse ModelGateway::chat_complete(const ModelEndpoint& endpoint, const ChatRequest& request) {
    endpoint.validate();
    if (request.purpose == CallPurpose::judge && request.temperature != 0.0) {
        throw InvalidArgument("judge requests must use temperature 0");
    }
    if (request.messages.empty()) throw InvalidArgument("chat request has no messages");

    ChatRequest req = request;
    if (req.model_name.empty()) req.model_name = endpoint.model_name;
    const json canonical = req.canonical();
    const std::string key = json_digest(canonical);

    ChatResponse out;
    out.transcript.request_hash = key;
    if (auto hit = cache_.get(key)) {
        ++hits_;
        out.text = hit->at("response").get<std::string>();
        out.transcript.response_text = out.text;
        out.transcript.cache_hit = true;
        if (hit->contains("usage")) {
            out.transcript.usage.prompt_tokens = hit->at("usage").value("prompt_tokens", 0);
            out.transcript.usage.completion_tokens = hit->at("usage").value("completion_tokens", 0);
        }
        return out;
    }
    ++misses_;

    json body{{"model", req.model_name}, {"messages", canonical.at("messages")}, {"temperature", req.temperature},
              {"max_tokens", req.max_output_tokens}};
    if (req.seed) body["seed"] = *req.seed;

    const auto t0 = std::chrono::steady_clock::now();
    int attempts = 0;
    const HttpResponse resp =
        post_with_retry(HttpRequest{endpoint.base_url, "/chat/completions", resolve_key(endpoint), body}, attempts);
    const auto t1 = std::chrono::steady_clock::now();

    const json parsed = parse_body(resp.body, "chat");
    std::string text;
    try {
        const auto& content = parsed.at("choices").at(0).at("message").at("content");
        text = content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chat response missing choices[0].message.content: ") + e.what());
    }
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        out.transcript.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
        out.transcript.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0);
    }

    out.text = text;
    out.transcript.response_text = text;
    out.transcript.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.transcript.attempts = attempts;
    cache_.put(key, json{{"request", canonical},
                         {"response", text},
                         {"usage",
                          {{"prompt_tokens", out.transcript.usage.prompt_tokens},
                           {"completion_tokens", out.transcript.usage.completion_tokens}}}});
    return out;
}

std::vector<std::vector<double>> ModelGateway::embed_texts(const std::vector<std::string>& texts,
                                                           const ModelEndpoint& endpoint) {
    if (texts.empty()) return {};
    endpoint.validate();
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw InvalidArgument("embed_texts: text #" + std::to_string(i) + " is empty");
    }

    auto key_for = [&](const std::string& t) {
        return json_digest(json{{"kind", "embedding"}, {"model", endpoint.model_name}, {"text", t}});
    };

    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::string> missing;
    std::unordered_set<std::string> queued;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (auto hit = cache_.get(key_for(texts[i]))) {
            ++hits_;
            out[i] = hit->at("vector").get<std::vector<double>>();
        } else if (queued.insert(texts[i]).second) {
            missing.push_back(texts[i]);
        }
    }

    const std::string api_key = missing.empty() ? std::string() : resolve_key(endpoint);
    const std::size_t batch = std::max<std::size_t>(1, options_.embedding_batch_size);
    for (std::size_t b = 0; b < missing.size(); b += batch) {
        const std::vector<std::string> slice(missing.begin() + static_cast<std::ptrdiff_t>(b),
                                             missing.begin() + static_cast<std::ptrdiff_t>(std::min(b + batch, missing.size())));
        misses_ += slice.size();
        int attempts = 0;
        const HttpResponse resp = post_with_retry(
            HttpRequest{endpoint.base_url, "/embeddings", api_key, json{{"model", endpoint.model_name}, {"input", slice}}},
            attempts);
        const json parsed = parse_body(resp.body, "embedding");
        if (!parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].size() != slice.size()) {
            throw ProtocolError("embedding response must carry one data entry per input");
        }
        std::vector<std::vector<double>> vecs(slice.size());
        for (std::size_t j = 0; j < parsed["data"].size(); ++j) {
            const auto& item = parsed["data"][j];
            const std::size_t idx = item.value("index", j);
            if (idx >= slice.size()) throw ProtocolError("embedding index out of range");
            try {
                vecs[idx] = item.at("embedding").get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("bad embedding entry: ") + e.what());
            }
        }
        for (std::size_t j = 0; j < slice.size(); ++j) {
            if (vecs[j].empty()) throw ProtocolError("empty embedding vector");
            cache_.put(key_for(slice[j]),
                       json{{"kind", "embedding"}, {"model", endpoint.model_name}, {"text", slice[j]}, {"vector", vecs[j]}});
        }
    }

    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (out[i].empty()) out[i] = cache_.get(key_for(texts[i]))->at("vector").get<std::vector<double>>();
    }
    const std::size_t dim = out.front().size();
    for (const auto& v : out) {
        if (v.size() != dim) {
            throw ProtocolError("embedding dimension mismatch in batch (" + std::to_string(dim) + " vs " +
                                std::to_string(v.size()) + ")");
        }
    }
    return out;
}

GatewayStats ModelGateway::stats() const {
    return GatewayStats{hits_.load(), misses_.load(), http_calls_.load(), retries_.load()};
}

// ---------------------------------------------------------------------------

RoutingTransport::RoutingTransport(std::shared_ptr<Transport> http) : http_(std::move(http)) {}

HttpResponse RoutingTransport::post(const HttpRequest& request) {
    if (request.base_url.rfind("mock:", 0) != 0) {
        if (!http_) return HttpResponse{0, {}, "no HTTP transport configured"};
        return http_->post(request);
    }
    std::shared_ptr<Transport> mock;
    {
        std::lock_guard lock(mu_);
        auto& slot = mocks_[request.base_url];
        if (!slot) slot = MockTransport::from_script_file(request.base_url.substr(5));
        mock = slot;
    }
    return mock->post(request);
}

}  // namespace ragcal
