#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ragcal/gateway.hpp"

namespace ragcal {

/// What the mock saw. For chat calls `prompt` is every message content joined
/// by newlines; for embedding calls `inputs` holds the texts.
struct MockCall {
    std::string path;
    std::string model;
    std::string prompt;
    std::vector<std::string> inputs;
    json body;

    bool is_chat() const { return path == "/chat/completions"; }
};

struct MockReply {
    int status = 200;
    std::string content;
    std::vector<std::vector<double>> embeddings;
    std::string error;

    static MockReply text(std::string s) { return MockReply{200, std::move(s), {}, {}}; }
    static MockReply vectors(std::vector<std::vector<double>> v) { return MockReply{200, {}, std::move(v), {}}; }
    static MockReply failure(int status, std::string why = {}) { return MockReply{status, {}, {}, std::move(why)}; }
};

/// Offline transport. Either a C++ responder, or an ordered script of
/// request-matcher -> response rules loaded from JSON:
///
///   {
///     "default_response": "...",                 // optional chat fallback
///     "embedding": {"mode": "hash", "dim": 64},  // optional embedding fallback
///     "rules": [
///       {"kind": "chat", "contains": ["a", "b"], "not_contains": "c", "regex": "...",
///        "model": "m", "times": 2, "status": 500},
///       {"kind": "chat", "contains": "x", "response": "answerability_flag: 1"},
///       {"kind": "chat", "contains": "x", "responses": ["first", "second"]},
///       {"kind": "chat", "contains": "x", "response_from_regex": "Context 1:\\n([^\\n]*)"},
///       {"kind": "chat", "response_from_regex": "answer: (.*)", "response": "question: $1"},
///       {"kind": "embedding", "text": "exact input", "vector": [1, 0, 0]}
///     ]
///   }
///
/// The first rule that matches and still has uses left fires. Calls are
/// serialized, so scripted sequences are consumed in request order.
class MockTransport : public Transport {
public:
    using Responder = std::function<MockReply(const MockCall&)>;

    explicit MockTransport(Responder responder);

    static std::shared_ptr<MockTransport> from_script(const json& script);
    static std::shared_ptr<MockTransport> from_script_file(const std::filesystem::path& path);

    HttpResponse post(const HttpRequest& request) override;

    std::size_t call_count() const;
    std::vector<MockCall> calls() const;

private:
    Responder responder_;
    mutable std::mutex mu_;
    std::vector<MockCall> log_;
};

/// Deterministic bag-of-words feature hashing, L2-normalized. Texts sharing
/// words get positive cosine, so mock retrieval still ranks sensibly.
std::vector<double> hash_embedding(std::string_view text, std::size_t dim = 64);

json chat_completion_body(const std::string& content, const std::string& model = "mock");
json embeddings_body(const std::vector<std::vector<double>>& vectors, const std::string& model = "mock");

}  // namespace ragcal
