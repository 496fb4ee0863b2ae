#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "ragcal/errors.hpp"
#include "ragcal/qa_generation.hpp"
#include "ragcal/util.hpp"
#include "test_support.hpp"

using namespace ragcal;

namespace {

Corpus corpus_of(std::size_t n, const std::string& marker = {}, std::size_t marker_every = 0) {
    std::vector<Document> docs;
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "doc" + std::to_string(i) + ".txt";
        std::string text = "Passage " + std::to_string(i) + " describes item " + std::to_string(i * 7) + ".";
        if (marker_every && i % marker_every == 0) text += " " + marker;
        docs.push_back(Document{id, id, text, count_tokens(text), {}});
        chunks.push_back(Chunk{make_chunk_id(id, 0), id, {0, count_tokens(text)}, {0, text.size()}, text});
    }
    return Corpus(docs, chunks, {});
}

QAGenerationConfig config(std::size_t workers = 1) {
    QAGenerationConfig c;
    c.generator = test::chat_endpoint("gen");
    c.judge = test::chat_endpoint("judge");
    c.embedder = test::embed_endpoint();
    c.workers = workers;
    return c;
}

std::string dataset_jsonl(const GenerationResult& r) {
    std::vector<json> rows;
    for (const auto& q : r.records) rows.push_back(to_json(q));
    return to_jsonl(rows);
}

}  // namespace

TEST(SampleContexts, ExhaustsWithoutReplacementFirst) {
    const Corpus c = corpus_of(5);
    const auto s = sample_contexts(c, 5, 1);
    std::set<std::string> ids;
    for (const auto& ch : s) ids.insert(ch.chunk_id);
    EXPECT_EQ(ids.size(), 5u);
}

TEST(SampleContexts, DeterministicAndDistinct) {
    const Corpus c = corpus_of(100);
    const auto a = sample_contexts(c, 3, 7);
    const auto b = sample_contexts(c, 3, 7);
    ASSERT_EQ(a.size(), 3u);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a[i].chunk_id, b[i].chunk_id);
        ids.insert(a[i].chunk_id);
    }
    EXPECT_EQ(ids.size(), 3u);
    EXPECT_EQ(sample_contexts(c, 250, 3).size(), 250u);
}

TEST(SampleContexts, NonPositiveNIsError) {
    const Corpus c = corpus_of(2);
    EXPECT_THROW(sample_contexts(c, 0, 1), InvalidArgument);
    EXPECT_THROW(sample_contexts(c, -3, 1), InvalidArgument);
}

TEST(GenerateQuestion, FixedTextFromMock) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"contains", "specific_flag"}, {"response", "specific_flag: 1"}},
                                                  {{"response", "What flow is the pump rated for?"}}}}});
    auto gw = test::make_gateway(mock);
    const Corpus c = corpus_of(1);
    EXPECT_EQ(generate_question(c.chunks()[0], *gw, config(), 1), "What flow is the pump rated for?");
}

TEST(GenerateQuestion, EmptyTwiceIsRejected) {
    auto mock = MockTransport::from_script(json{{"default_response", ""}});
    auto gw = test::make_gateway(mock);
    const Corpus c = corpus_of(1);
    EXPECT_FALSE(generate_question(c.chunks()[0], *gw, config(), 1).has_value());
    EXPECT_EQ(mock->call_count(), 2u);
}

TEST(GenerateQuestion, FailedSelfCheckRegeneratesOnce) {
    std::atomic<int> asked{0};
    auto mock = std::make_shared<MockTransport>([&](const MockCall& c) {
        if (c.prompt.find("specific_flag") != std::string::npos) return MockReply::text("specific_flag: 0");
        return MockReply::text(asked++ == 0 ? "vague?" : "Which supervisor reissues the permit?");
    });
    auto gw = test::make_gateway(mock);
    const Corpus c = corpus_of(1);
    EXPECT_EQ(generate_question(c.chunks()[0], *gw, config(), 3), "Which supervisor reissues the permit?");
    EXPECT_EQ(asked.load(), 2);
}

TEST(GenerateQuestion, GenerationUsesConfiguredTemperature) {
    auto mock = MockTransport::from_script(json{{"rules",
                                                 {{{"contains", "specific_flag"}, {"response", "specific_flag: 1"}},
                                                  {{"response", "q?"}}}}});
    auto gw = test::make_gateway(mock);
    const Corpus c = corpus_of(1);
    generate_question(c.chunks()[0], *gw, config(), 1);
    const auto calls = mock->calls();
    EXPECT_DOUBLE_EQ(calls.at(0).body.at("temperature").get<double>(), 0.7);
    EXPECT_DOUBLE_EQ(calls.at(1).body.at("temperature").get<double>(), 0.0);
}

TEST(GenerateAnswer, FixedAndEmpty) {
    const Corpus c = corpus_of(1);
    auto fixed = test::make_gateway(MockTransport::from_script(json{{"default_response", "They return to the RP."}}));
    EXPECT_EQ(generate_answer("q?", c.chunks()[0], *fixed, config(), 1), "They return to the RP.");
    auto empty = test::make_gateway(MockTransport::from_script(json{{"default_response", "  "}}));
    EXPECT_FALSE(generate_answer("q?", c.chunks()[0], *empty, config(), 1).has_value());
}

namespace {

// Judge with scripted answerability, faithfulness (as m of n statements) and
// relevance (as the cosine of the generated question to the original).
std::shared_ptr<MockTransport> scored_judge(int answerable, int supported, int total, double cosine) {
    return std::make_shared<MockTransport>([=](const MockCall& c) {
        if (!c.is_chat()) {
            std::vector<std::vector<double>> out;
            for (const auto& t : c.inputs) {
                if (t == "the question") {
                    out.push_back({1.0, 0.0});
                } else {
                    out.push_back({cosine, std::sqrt(1.0 - cosine * cosine)});
                }
            }
            return MockReply::vectors(out);
        }
        const auto& p = c.prompt;
        if (p.find("answerability_flag") != std::string::npos) {
            return MockReply::text("answerability_flag: " + std::to_string(answerable));
        }
        if (p.find("atomic factual statements") != std::string::npos) {
            std::string s;
            for (int i = 0; i < total; ++i) s += "statement: claim " + std::to_string(i) + "\n";
            return MockReply::text(s);
        }
        if (p.find("verdict_<number>") != std::string::npos) {
            std::string s;
            for (int i = 1; i <= total; ++i) s += "verdict_" + std::to_string(i) + ": " + (i <= supported ? "1" : "0") + "\n";
            return MockReply::text(s);
        }
        return MockReply::text("question: generated");
    });
}

}  // namespace

TEST(ValidateCandidate, AcceptsWhenAllAboveDefaults) {
    const Corpus c = corpus_of(1);
    auto gw = test::make_gateway(scored_judge(1, 19, 20, 0.96));
    const auto v = validate_candidate("the question", "an answer", c.chunks()[0], *gw, config());
    EXPECT_TRUE(v.accepted);
    EXPECT_DOUBLE_EQ(v.scores.faithfulness, 0.95);
    EXPECT_NEAR(v.scores.answer_relevance, 0.96, 1e-12);
}

TEST(ValidateCandidate, AnswerabilityGateFirst) {
    const Corpus c = corpus_of(1);
    auto gw = test::make_gateway(scored_judge(0, 19, 20, 0.96));
    const auto v = validate_candidate("the question", "an answer", c.chunks()[0], *gw, config());
    EXPECT_FALSE(v.accepted);
    EXPECT_EQ(v.reason, "answerability");
}

TEST(ValidateCandidate, FaithfulnessBelowThreshold) {
    const Corpus c = corpus_of(1);
    auto gw = test::make_gateway(scored_judge(1, 79, 100, 0.99));
    const auto v = validate_candidate("the question", "an answer", c.chunks()[0], *gw, config());
    EXPECT_FALSE(v.accepted);
    EXPECT_EQ(v.reason, "faithfulness");
}

TEST(ValidateCandidate, RelevanceBelowThreshold) {
    const Corpus c = corpus_of(1);
    auto gw = test::make_gateway(scored_judge(1, 1, 1, 0.5));
    EXPECT_EQ(validate_candidate("the question", "an answer", c.chunks()[0], *gw, config()).reason, "answer_relevance");
}

TEST(ValidateCandidate, UnscorableMetricIsJudgeFailure) {
    const Corpus c = corpus_of(1);
    auto gw = test::make_gateway(MockTransport::from_script(json{{"default_response", "no idea"}}));
    EXPECT_EQ(validate_candidate("q", "a", c.chunks()[0], *gw, config()).reason, "judge-failure");
}

TEST(FilterThresholds, Validation) {
    EXPECT_NO_THROW(FilterThresholds{}.validate());
    EXPECT_THROW((FilterThresholds{0.5, 0.8, 0.8}.validate()), ConfigError);
    EXPECT_THROW((FilterThresholds{1.0, 1.2, 0.8}.validate()), ConfigError);
}

TEST(GenerateDataset, AllAcceptingMock) {
    const Corpus c = corpus_of(12);
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& m) { return test::pipeline_reply(m); }));
    const auto r = generate_dataset(c, 10, *gw, config(3), 42);
    ASSERT_EQ(r.records.size(), 10u);
    EXPECT_EQ(r.stats.accepted, 10u);
    EXPECT_EQ(r.stats.attempts, 10u);
    EXPECT_EQ(r.stats.total_rejected(), 0u);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_EQ(r.records.front().qa_id, "qa-00001");
    for (const auto& rec : r.records) {
        const Chunk* ch = c.find_chunk(rec.chunk_id);
        ASSERT_NE(ch, nullptr);
        EXPECT_EQ(rec.question, "Q " + ch->text);
        EXPECT_GE(rec.filter_scores.faithfulness, 0.8);
        EXPECT_GE(rec.filter_scores.answer_relevance, 0.8);
        EXPECT_EQ(rec.filter_scores.answerability, 1.0);
        EXPECT_EQ(rec.generator_model, "gen");
    }
}

TEST(GenerateDataset, MarkedContextsNeverEmitted) {
    const Corpus c = corpus_of(20, "ZZMARK", 3);
    auto gw = test::make_gateway(
        std::make_shared<MockTransport>([](const MockCall& m) { return test::pipeline_reply(m, "ZZMARK"); }));
    const auto r = generate_dataset(c, 8, *gw, config(2), 9);
    EXPECT_EQ(r.records.size(), 8u);
    for (const auto& rec : r.records) EXPECT_EQ(c.find_chunk(rec.chunk_id)->text.find("ZZMARK"), std::string::npos);
    EXPECT_EQ(r.stats.accepted + r.stats.total_rejected(), r.stats.attempts);
    EXPECT_EQ(r.stats.rejected_by_metric.at("faithfulness"), r.stats.total_rejected());
}

TEST(GenerateDataset, BudgetExhaustionGivesPartialDatasetAndWarning) {
    const Corpus c = corpus_of(6, "ZZMARK", 2);
    auto gw = test::make_gateway(
        std::make_shared<MockTransport>([](const MockCall& m) { return test::pipeline_reply(m, "ZZMARK"); }));
    QAGenerationConfig cfg = config(1);
    cfg.budget_multiplier = 1;
    const auto r = generate_dataset(c, 6, *gw, cfg, 1);
    EXPECT_LT(r.records.size(), 6u);
    EXPECT_TRUE(r.stats.budget_exhausted);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.stats.attempts, 6u);
}

TEST(GenerateDataset, WarmCacheIsByteIdentical) {
    const auto dir = test::fresh_dir("gen-cache");
    const Corpus c = corpus_of(10);
    std::string cold, warm;
    {
        auto gw = test::make_gateway(
            std::make_shared<MockTransport>([](const MockCall& m) { return test::pipeline_reply(m); }), dir);
        cold = dataset_jsonl(generate_dataset(c, 5, *gw, config(2), 5));
    }
    auto offline = MockTransport::from_script(json{{"rules", {{{"status", 500}}}}});
    auto gw = test::make_gateway(offline, dir);
    warm = dataset_jsonl(generate_dataset(c, 5, *gw, config(2), 5));
    EXPECT_EQ(cold, warm);
    EXPECT_EQ(offline->call_count(), 0u);
}

TEST(GenerateDataset, TransportFailuresAreGenerationRejections) {
    const Corpus c = corpus_of(3);
    auto gw = test::make_gateway(MockTransport::from_script(json{{"rules", {{{"status", 400}}}}}));
    const auto r = generate_dataset(c, 1, *gw, config(), 1);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(r.stats.rejected_by_metric.at("generation"), r.stats.attempts);
}

TEST(QARecord, JsonRoundTrip) {
    const QARecord r{"qa-00001", "q?", "a.", "d:0", {1.0, 0.9, 0.85}, "gen", 4};
    const auto back = qa_record_from_json(to_json(r));
    EXPECT_EQ(to_json(back), to_json(r));
}
