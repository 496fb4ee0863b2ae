#include <gtest/gtest.h>

#include <cstdlib>

#include "ragcal/errors.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/mock_transport.hpp"
#include "ragcal/util.hpp"
#include "test_support.hpp"

using namespace ragcal;

namespace {

ChatRequest user_request(const std::string& text, double temperature = 0.0) {
    ChatRequest r;
    r.messages = {{"user", text}};
    r.temperature = temperature;
    return r;
}

class RawTransport : public Transport {
public:
    explicit RawTransport(std::string body) : body_(std::move(body)) {}
    HttpResponse post(const HttpRequest&) override { return HttpResponse{200, body_, {}}; }

private:
    std::string body_;
};

}  // namespace

TEST(Gateway, ScriptedReplyIsReturnedVerbatim) {
    auto mock = MockTransport::from_script(json{{"rules", {{{"contains", "score"}, {"response", "correctness_score: 0.7"}}}}});
    auto gw = test::make_gateway(mock);
    const auto r = gw->chat_complete(test::chat_endpoint(), make_judge_request("", "score this"));
    EXPECT_EQ(r.text, "correctness_score: 0.7");
    EXPECT_FALSE(r.transcript.cache_hit);
    EXPECT_EQ(r.transcript.attempts, 1);
}

TEST(Gateway, RepeatedRequestHitsCache) {
    auto mock = MockTransport::from_script(json{{"default_response", "same"}});
    auto gw = test::make_gateway(mock);
    const auto a = gw->chat_complete(test::chat_endpoint(), user_request("hello"));
    const auto b = gw->chat_complete(test::chat_endpoint(), user_request("hello"));
    EXPECT_EQ(a.text, b.text);
    EXPECT_FALSE(a.transcript.cache_hit);
    EXPECT_TRUE(b.transcript.cache_hit);
    EXPECT_EQ(a.transcript.request_hash, b.transcript.request_hash);
    EXPECT_EQ(mock->call_count(), 1u);
    EXPECT_EQ(gw->stats().cache_hits, 1u);
}

TEST(Gateway, RequestHashCoversTemperatureAndMessages) {
    auto mock = MockTransport::from_script(json{{"default_response", "x"}});
    auto gw = test::make_gateway(mock);
    const auto a = gw->chat_complete(test::chat_endpoint(), user_request("hello", 0.0));
    const auto b = gw->chat_complete(test::chat_endpoint(), user_request("hello", 0.7));
    const auto c = gw->chat_complete(test::chat_endpoint(), user_request("hello!", 0.0));
    EXPECT_NE(a.transcript.request_hash, b.transcript.request_hash);
    EXPECT_NE(a.transcript.request_hash, c.transcript.request_hash);
    ChatRequest expected = user_request("hello");
    expected.model_name = "mock-judge";
    EXPECT_EQ(a.transcript.request_hash, json_digest(expected.canonical()));
}

TEST(Gateway, RetriesThenSucceeds) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"status", 503}, {"times", 2}},
                                                  {{"response", "ok"}}}}});
    auto gw = test::make_gateway(mock);
    const auto r = gw->chat_complete(test::chat_endpoint(), user_request("q"));
    EXPECT_EQ(r.text, "ok");
    EXPECT_EQ(r.transcript.attempts, 3);
    EXPECT_EQ(gw->stats().retries, 2u);
}

TEST(Gateway, ExhaustedRetriesCarryLastStatus) {
    auto mock = MockTransport::from_script(json{{"rules", {{{"status", 429}}}}});
    auto gw = test::make_gateway(mock);
    try {
        gw->chat_complete(test::chat_endpoint(), user_request("q"));
        FAIL() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.last_status(), 429);
        EXPECT_EQ(e.attempts(), 5);
    }
}

TEST(Gateway, ClientErrorsAreNotRetried) {
    auto mock = MockTransport::from_script(json{{"rules", {{{"status", 401}}}}});
    auto gw = test::make_gateway(mock);
    try {
        gw->chat_complete(test::chat_endpoint(), user_request("q"));
        FAIL() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.last_status(), 401);
        EXPECT_EQ(e.attempts(), 1);
    }
}

TEST(Gateway, MalformedBodyIsProtocolError) {
    auto gw = test::make_gateway(std::make_shared<RawTransport>("this is not json"));
    EXPECT_THROW(gw->chat_complete(test::chat_endpoint(), user_request("q")), ProtocolError);
    auto gw2 = test::make_gateway(std::make_shared<RawTransport>("{\"choices\": []}"));
    EXPECT_THROW(gw2->chat_complete(test::chat_endpoint(), user_request("q")), ProtocolError);
}

TEST(Gateway, JudgeRequestsMustBeDeterministic) {
    auto mock = MockTransport::from_script(json{{"default_response", "x"}});
    auto gw = test::make_gateway(mock);
    ChatRequest r = make_judge_request("", "judge me");
    EXPECT_EQ(r.temperature, 0.0);
    EXPECT_EQ(r.purpose, CallPurpose::judge);
    r.temperature = 0.3;
    EXPECT_THROW(gw->chat_complete(test::chat_endpoint(), r), InvalidArgument);
    EXPECT_EQ(mock->call_count(), 0u);
}

TEST(Gateway, RequestBodyCarriesModelAndTemperature) {
    auto mock = MockTransport::from_script(json{{"default_response", "x"}});
    auto gw = test::make_gateway(mock);
    gw->chat_complete(test::chat_endpoint("my-model"), make_judge_request("", "p"));
    const auto calls = mock->calls();
    ASSERT_EQ(calls.size(), 1u);
    EXPECT_EQ(calls[0].model, "my-model");
    EXPECT_EQ(calls[0].body.at("temperature").get<double>(), 0.0);
}

TEST(Gateway, MissingApiKeyIsConfigError) {
    ::unsetenv("RAGCAL_TEST_UNSET_KEY");
    auto mock = MockTransport::from_script(json{{"default_response", "x"}});
    auto gw = test::make_gateway(mock);
    const ModelEndpoint e{"https://example.invalid/v1", "RAGCAL_TEST_UNSET_KEY", "m", EndpointKind::chat};
    EXPECT_THROW(gw->chat_complete(e, user_request("q")), ConfigError);
    ::setenv("RAGCAL_TEST_SET_KEY", "sk-test", 1);
    const ModelEndpoint ok{"https://example.invalid/v1", "RAGCAL_TEST_SET_KEY", "m", EndpointKind::chat};
    EXPECT_EQ(gw->chat_complete(ok, user_request("q")).text, "x");
}

TEST(Gateway, DiskCacheSurvivesRestart) {
    const auto dir = test::fresh_dir("cache");
    auto mock = MockTransport::from_script(
        json{{"default_response", "persisted"}, {"embedding", {{"mode", "hash"}, {"dim", 4}}}});
    {
        auto gw = test::make_gateway(mock, dir);
        gw->chat_complete(test::chat_endpoint(), user_request("q"));
        gw->embed_texts({"alpha"}, test::embed_endpoint());
    }
    auto silent = MockTransport::from_script(json{{"rules", {{{"status", 500}}}}});
    auto gw = test::make_gateway(silent, dir);
    const auto r = gw->chat_complete(test::chat_endpoint(), user_request("q"));
    EXPECT_EQ(r.text, "persisted");
    EXPECT_TRUE(r.transcript.cache_hit);
    EXPECT_EQ(gw->embed_texts({"alpha"}, test::embed_endpoint()).size(), 1u);
    EXPECT_EQ(silent->call_count(), 0u);
}

TEST(Embeddings, EmptyBatch) {
    auto gw = test::make_gateway(MockTransport::from_script(json::object()));
    EXPECT_TRUE(gw->embed_texts({}, test::embed_endpoint()).empty());
}

TEST(Embeddings, ScriptedBasisVectorsInOrder) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"kind", "embedding"}, {"text", "first"}, {"vector", {1, 0}}},
                                                  {{"kind", "embedding"}, {"text", "second"}, {"vector", {0, 1}}}}}});
    auto gw = test::make_gateway(mock);
    const auto v = gw->embed_texts({"first", "second"}, test::embed_endpoint());
    EXPECT_EQ(v, (std::vector<std::vector<double>>{{1, 0}, {0, 1}}));
}

TEST(Embeddings, SameTextTwiceGivesEqualVectors) {
    auto mock = MockTransport::from_script(json{{"embedding", {{"mode", "hash"}, {"dim", 16}}}});
    auto gw = test::make_gateway(mock);
    const auto v = gw->embed_texts({"repeat me", "repeat me"}, test::embed_endpoint());
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0], v[1]);
    EXPECT_EQ(mock->calls().at(0).inputs.size(), 1u);
}

TEST(Embeddings, DimensionMismatchIsProtocolError) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"kind", "embedding"}, {"text", "a"}, {"vector", {1, 0}}},
                                                  {{"kind", "embedding"}, {"text", "b"}, {"vector", {0, 1, 0}}}}}});
    auto gw = test::make_gateway(mock);
    EXPECT_THROW(gw->embed_texts({"a", "b"}, test::embed_endpoint()), ProtocolError);
}

TEST(Embeddings, BatchesRespectBatchSize) {
    auto mock = MockTransport::from_script(json{{"embedding", {{"mode", "hash"}, {"dim", 8}}}});
    GatewayOptions o = test::fast_options();
    o.embedding_batch_size = 2;
    ModelGateway gw(mock, o);
    gw.embed_texts({"a", "b", "c", "d", "e"}, test::embed_endpoint());
    EXPECT_EQ(mock->call_count(), 3u);
}

TEST(RoutingTransport, MockPrefixLoadsScriptFile) {
    const auto dir = test::fresh_dir("routing");
    write_file_atomic(dir / "m.json", R"({"default_response": "routed"})");
    auto gw = test::make_gateway(std::make_shared<RoutingTransport>(std::make_shared<RawTransport>("{}")));
    const ModelEndpoint e{"mock:" + (dir / "m.json").string(), "", "m", EndpointKind::chat};
    EXPECT_EQ(gw->chat_complete(e, user_request("q")).text, "routed");
}

TEST(MockTransport, RegexCaptureWithTemplate) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"response_from_regex", "answer: ([^\\n]*)"},
                                                   {"response", "question: $1?"}}}}});
    auto gw = test::make_gateway(mock);
    EXPECT_EQ(gw->chat_complete(test::chat_endpoint(), user_request("answer: the sky")).text, "question: the sky?");
}

TEST(MockTransport, ChatRuleNeedsAResponse) {
    EXPECT_THROW(MockTransport::from_script(json{{"rules", {{{"contains", "x"}}}}}), ConfigError);
}
