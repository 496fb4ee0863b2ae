#include "ragcal/mock_transport.hpp"

#include <cctype>
#include <cmath>
#include <optional>
#include <regex>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

std::vector<std::string> as_string_list(const json& j) {
    if (j.is_null()) return {};
    if (j.is_string()) return {j.get<std::string>()};
    return j.get<std::vector<std::string>>();
}

struct Rule {
    std::string kind = "chat";
    std::string model;
    std::vector<std::string> contains;
    std::vector<std::string> not_contains;
    std::optional<std::regex> pattern;
    std::string exact_text;
    long remaining = -1;  // -1 = unlimited
    int status = 200;
    std::vector<std::string> responses;
    std::size_t next_response = 0;
    std::optional<std::regex> capture;
    std::vector<double> vector;

    bool matches(const std::string& model_name, const std::string& subject) const {
        if (remaining == 0) return false;
        if (!model.empty() && model != model_name) return false;
        if (!exact_text.empty() && subject != exact_text) return false;
        for (const auto& c : contains) {
            if (subject.find(c) == std::string::npos) return false;
        }
        for (const auto& c : not_contains) {
            if (subject.find(c) != std::string::npos) return false;
        }
        if (pattern && !std::regex_search(subject, *pattern)) return false;
        return true;
    }
};

Rule parse_rule(const json& r) {
    Rule rule;
    rule.kind = r.value("kind", "chat");
    if (rule.kind != "chat" && rule.kind != "embedding") throw ConfigError("mock rule kind must be chat|embedding");
    rule.model = r.value("model", "");
    rule.contains = as_string_list(r.value("contains", json()));
    rule.not_contains = as_string_list(r.value("not_contains", json()));
    if (r.contains("regex")) rule.pattern.emplace(r["regex"].get<std::string>());
    rule.exact_text = r.value("text", "");
    rule.remaining = r.value("times", -1L);
    rule.status = r.value("status", 200);
    if (r.contains("response")) rule.responses.push_back(r["response"].get<std::string>());
    if (r.contains("responses")) rule.responses = r["responses"].get<std::vector<std::string>>();
    if (r.contains("response_from_regex")) rule.capture.emplace(r["response_from_regex"].get<std::string>());
    if (r.contains("vector")) rule.vector = r["vector"].get<std::vector<double>>();
    if (rule.kind == "chat" && rule.status == 200 && rule.responses.empty() && !rule.capture) {
        throw ConfigError("mock chat rule needs response, responses or response_from_regex");
    }
    if (rule.kind == "embedding" && rule.status == 200 && rule.vector.empty()) {
        throw ConfigError("mock embedding rule needs a vector");
    }
    return rule;
}

class ScriptResponder {
public:
    explicit ScriptResponder(const json& script) {
        if (script.contains("rules")) {
            for (const auto& r : script["rules"]) rules_.push_back(parse_rule(r));
        }
        if (script.contains("default_response")) default_response_ = script["default_response"].get<std::string>();
        if (script.contains("embedding")) {
            const auto& e = script["embedding"];
            if (e.value("mode", "hash") != "hash") throw ConfigError("mock embedding mode must be 'hash'");
            hash_dim_ = e.value("dim", 64);
            if (hash_dim_ == 0) throw ConfigError("mock embedding dim must be positive");
        }
    }

    MockReply operator()(const MockCall& call) {
        if (call.is_chat()) return chat(call);
        std::vector<std::vector<double>> out;
        for (const auto& text : call.inputs) {
            Rule* rule = find("embedding", call.model, text);
            if (rule != nullptr) {
                if (rule->remaining > 0) --rule->remaining;
                if (rule->status != 200) return MockReply::failure(rule->status, "scripted failure");
                out.push_back(rule->vector);
            } else if (hash_dim_ > 0) {
                out.push_back(hash_embedding(text, hash_dim_));
            } else {
                return MockReply::failure(404, "no mock embedding rule matched: " + text.substr(0, 80));
            }
        }
        return MockReply::vectors(std::move(out));
    }

private:
    Rule* find(const std::string& kind, const std::string& model, const std::string& subject) {
        for (auto& r : rules_) {
            if (r.kind == kind && r.matches(model, subject)) return &r;
        }
        return nullptr;
    }

    MockReply chat(const MockCall& call) {
        Rule* rule = find("chat", call.model, call.prompt);
        if (rule == nullptr) {
            if (default_response_) return MockReply::text(*default_response_);
            return MockReply::failure(404, "no mock chat rule matched");
        }
        if (rule->remaining > 0) --rule->remaining;
        if (rule->status != 200) return MockReply::failure(rule->status, "scripted failure");
        if (rule->capture) {
            std::smatch m;
            if (std::regex_search(call.prompt, m, *rule->capture) && m.size() > 1) {
                if (!rule->responses.empty()) return MockReply::text(m.format(rule->responses.front()));
                return MockReply::text(m[1].str());
            }
            return MockReply::text("");
        }
        const std::string& r = rule->responses[rule->next_response % rule->responses.size()];
        ++rule->next_response;
        return MockReply::text(r);
    }

    std::vector<Rule> rules_;
    std::optional<std::string> default_response_;
    std::size_t hash_dim_ = 0;
};

}  // namespace

MockTransport::MockTransport(Responder responder) : responder_(std::move(responder)) {
    if (!responder_) throw InvalidArgument("mock transport needs a responder");
}

std::shared_ptr<MockTransport> MockTransport::from_script(const json& script) {
    auto responder = std::make_shared<ScriptResponder>(script);
    return std::make_shared<MockTransport>([responder](const MockCall& c) { return (*responder)(c); });
}

std::shared_ptr<MockTransport> MockTransport::from_script_file(const std::filesystem::path& path) {
    json script;
    try {
        script = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("mock script " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw ConfigError("mock script unreadable: " + path.string());
    }
    return from_script(script);
}

HttpResponse MockTransport::post(const HttpRequest& request) {
    MockCall call;
    call.path = request.path;
    call.body = request.body;
    call.model = request.body.value("model", "");
    if (call.is_chat()) {
        for (const auto& m : request.body.value("messages", json::array())) {
            if (!call.prompt.empty()) call.prompt.push_back('\n');
            call.prompt += m.value("content", "");
        }
    } else {
        call.inputs = as_string_list(request.body.value("input", json()));
    }

    std::lock_guard lock(mu_);
    log_.push_back(call);
    const MockReply reply = responder_(call);
    if (reply.status != 200) return HttpResponse{reply.status, json{{"error", reply.error}}.dump(), reply.error};
    if (call.is_chat()) return HttpResponse{200, chat_completion_body(reply.content, call.model).dump(), {}};
    return HttpResponse{200, embeddings_body(reply.embeddings, call.model).dump(), {}};
}

std::size_t MockTransport::call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

std::vector<MockCall> MockTransport::calls() const {
    std::lock_guard lock(mu_);
    return log_;
}

std::vector<double> hash_embedding(std::string_view text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        // FNV-1a keeps the mapping stable across platforms.
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : word) {
            h ^= c;
            h *= 1099511628211ull;
        }
        v[h % dim] += 1.0;
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

json chat_completion_body(const std::string& content, const std::string& model) {
    return json{{"id", "mock"},
                {"object", "chat.completion"},
                {"model", model},
                {"choices", json::array({json{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", content}}},
                                              {"finish_reason", "stop"}}})},
                {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
}

json embeddings_body(const std::vector<std::vector<double>>& vectors, const std::string& model) {
    json data = json::array();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vectors[i]}});
    }
    return json{{"object", "list"}, {"model", model}, {"data", data}};
}

}  // namespace ragcal
