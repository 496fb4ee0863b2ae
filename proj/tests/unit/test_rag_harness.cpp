#include <gtest/gtest.h>

#include <regex>

#include "ragcal/errors.hpp"
#include "ragcal/rag_harness.hpp"
#include "ragcal/util.hpp"
#include "test_support.hpp"

using namespace ragcal;

namespace {

struct Bench {
    Corpus corpus;
    std::vector<std::string> ids;  // chunk ids in corpus order
    VectorIndex index;
};

// Four one-chunk documents. Every query embeds to e0, so the index ranks
// chunks by cosine to e0: ids[2] > ids[1] > ids[0] > ids[3].
Bench four_docs() {
    const auto dir = test::fresh_dir("rag-docs");
    write_file_atomic(dir / "a.txt", "alpha pumps need grease ALPHA");
    write_file_atomic(dir / "b.txt", "bravo valves need seals BRAVO");
    write_file_atomic(dir / "c.txt", "charlie tanks need vents TRUTHTEXT");
    write_file_atomic(dir / "d.txt", "delta belts need tension DELTA");
    Bench b;
    b.corpus = load_corpus({dir}, ChunkingConfig{});
    for (const auto& c : b.corpus.chunks()) b.ids.push_back(c.chunk_id);
    b.index = VectorIndex::build(b.ids, {{1, 1, 0, 0}, {1, 0.5, 0, 0}, {1, 0.1, 0, 0}, {0, 0, 0, 1}});
    return b;
}

MockReply constant_embeddings(const MockCall& c) {
    return MockReply::vectors(std::vector<std::vector<double>>(c.inputs.size(), {1, 0, 0, 0}));
}

// Generator answers "TRUTH" when the truth chunk is in its context; the judge
// scores correctness from the reference: "score=<v>", or 1/0 on "TRUTH".
MockReply harness_world(const MockCall& c) {
    if (!c.is_chat()) return constant_embeddings(c);
    const std::string& p = c.prompt;
    if (p.find("provided context") != std::string::npos) {
        return MockReply::text(p.find("TRUTHTEXT") != std::string::npos ? "TRUTH" : "unknown");
    }
    if (p.find("correctness_score") != std::string::npos) {
        const std::string ref = test::last_json_string(p, "reference");
        if (ref.rfind("score=", 0) == 0) return MockReply::text("correctness_score: " + ref.substr(6));
        const std::string resp = test::last_json_string(p, "response");
        return MockReply::text(std::string("correctness_score: ") + (resp == "TRUTH" ? "1" : "0"));
    }
    return test::pipeline_reply(c);
}

QARecord qa(std::string id, std::string question, std::string answer, std::string chunk) {
    QARecord r;
    r.qa_id = std::move(id);
    r.question = std::move(question);
    r.answer = std::move(answer);
    r.chunk_id = std::move(chunk);
    return r;
}

RagConfig config(std::size_t k) {
    RagConfig cfg;
    cfg.embedder = test::embed_endpoint();
    cfg.generator = test::chat_endpoint("gen");
    cfg.judge = test::chat_endpoint("judge");
    cfg.k_retrieve = k;
    cfg.workers = 2;
    return cfg;
}

EvalRunResult run_with_scores(const std::vector<std::optional<double>>& scores) {
    std::vector<QuestionResult> qs;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        QuestionResult q;
        q.qa_id = "qa-" + std::to_string(i);
        q.question = "question " + std::to_string(i) + " LABELS[" + (i % 2 ? "Not Extracted" : "Missed Top Ranked") + "]";
        if (scores[i]) {
            MetricScore m;
            m.metric_name = kMetricAnswerCorrectness;
            m.value = scores[i];
            m.parse_ok = true;
            q.answer_correctness = m;
        }
        qs.push_back(q);
    }
    EvalRunResult r;
    r.questions = qs;
    return r;
}

MockReply taxonomy_from_question(const MockCall& c) {
    std::smatch m;
    if (std::regex_search(c.prompt, m, std::regex("LABELS\\[([^\\]]*)\\]"))) {
        if (m[1].str() == "garbage") return MockReply::text("no idea");
        return MockReply::text("rationale: scripted\nfailure_labels: " + m[1].str());
    }
    return MockReply::text("failure_labels: none");
}

}  // namespace

TEST(RagGeneration, EchoGeneratorAndOversizedK) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        if (!c.is_chat()) return constant_embeddings(c);
        return MockReply::text(test::line_after(c.prompt, "question: "));
    }));
    const auto ans = answer_with_rag("what needs vents?", "q1", b.index, b.corpus, *gw, config(10));
    ASSERT_TRUE(ans.ok());
    EXPECT_EQ(ans.answer, "what needs vents?");
    EXPECT_EQ(ans.retrieval.ranked.size(), 4u);
    EXPECT_EQ(ans.contexts.size(), 4u);
    EXPECT_EQ(ans.retrieval.ranked[0].chunk_id, b.ids[2]);
    EXPECT_EQ(ans.contexts[0], b.corpus.find_chunk(b.ids[2])->text);
}

TEST(RagGeneration, TransportFailureIsRecordedNotThrown) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        if (!c.is_chat()) return constant_embeddings(c);
        return MockReply::failure(500);
    }));
    const auto ans = answer_with_rag("q", "q1", b.index, b.corpus, *gw, config(2));
    EXPECT_FALSE(ans.ok());
}

TEST(EvaluateRun, PerfectMocksScoreOne) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    const std::vector<QARecord> data{qa("qa-00002", "what needs vents?", "vents", b.ids[2]),
                                     qa("qa-00001", "what else needs vents?", "vents", b.ids[2])};
    const auto run = evaluate_run(data, b.index, b.corpus, *gw, config(1));
    ASSERT_EQ(run.questions.size(), 2u);
    EXPECT_EQ(run.questions[0].qa_id, "qa-00001");
    for (const char* m : {kMetricAnswerCorrectness, kMetricFaithfulness, kMetricAnswerRelevance}) {
        EXPECT_NEAR(*run.metrics.at(m).mean, 1.0, 1e-9) << m;
        EXPECT_EQ(run.metrics.at(m).scored, 2u);
    }
    EXPECT_DOUBLE_EQ(run.recall_at_k, 1.0);
    EXPECT_DOUBLE_EQ(run.mrr_at_k, 1.0);
}

TEST(EvaluateRun, MeanOfJudgeScores) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    const std::vector<QARecord> data{qa("qa-00001", "q one", "score=0.8", b.ids[2]),
                                     qa("qa-00002", "q two", "score=0.9", b.ids[1])};
    const auto run = evaluate_run(data, b.index, b.corpus, *gw, config(2));
    EXPECT_NEAR(*run.metrics.at(kMetricAnswerCorrectness).mean, 0.85, 1e-12);
    EXPECT_DOUBLE_EQ(run.recall_at_k, 1.0);
    EXPECT_NEAR(run.mrr_at_k, (1.0 + 1.0 / 2) / 2, 1e-12);
}

TEST(EvaluateRun, EmptyDatasetIsError) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    EXPECT_THROW(evaluate_run({}, b.index, b.corpus, *gw, config(2)), PipelineError);
}

TEST(EvaluateRun, GenerationFailuresAreCountedAndExcluded) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        if (c.is_chat() && c.prompt.find("provided context") != std::string::npos &&
            c.prompt.find("BROKEN") != std::string::npos) {
            return MockReply::failure(400);
        }
        return harness_world(c);
    }));
    const std::vector<QARecord> data{qa("qa-00001", "fine", "score=0.5", b.ids[2]),
                                     qa("qa-00002", "BROKEN", "score=0.1", b.ids[2])};
    const auto run = evaluate_run(data, b.index, b.corpus, *gw, config(1));
    EXPECT_EQ(run.failed_questions, 1u);
    EXPECT_EQ(run.metrics.at(kMetricAnswerCorrectness).scored, 1u);
    EXPECT_NEAR(*run.metrics.at(kMetricAnswerCorrectness).mean, 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(run.recall_at_k, 1.0);
}

TEST(EvaluateRun, NearMissOnOverlappingNeighbour) {
    const auto dir = test::fresh_dir("rag-near");
    std::string text;
    for (int i = 0; i < 30; ++i) text += "t" + std::to_string(i) + " ";
    write_file_atomic(dir / "long.txt", text);
    const Corpus corpus = load_corpus({dir}, ChunkingConfig{10, 5, {}});
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vecs;
    for (const auto& c : corpus.chunks()) {
        ids.push_back(c.chunk_id);
        vecs.push_back(c.token_span.begin == 5 ? std::vector<double>{1, 0} : std::vector<double>{0, 1});
    }
    const auto index = VectorIndex::build(ids, vecs);
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        if (!c.is_chat()) return MockReply::vectors(std::vector<std::vector<double>>(c.inputs.size(), {1, 0}));
        return test::pipeline_reply(c);
    }));
    std::string truth, far;
    for (const auto& c : corpus.chunks()) {
        if (c.token_span.begin == 10) truth = c.chunk_id;
        if (c.token_span.begin == 20) far = c.chunk_id;
    }
    const auto run = evaluate_run({qa("qa-00001", "q", "a", truth), qa("qa-00002", "r", "a", far)}, index, corpus,
                                  *gw, config(1));
    EXPECT_TRUE(run.questions[0].near_miss);
    EXPECT_FALSE(run.questions[1].near_miss);
    EXPECT_EQ(run.near_misses, 1u);
    EXPECT_DOUBLE_EQ(run.recall_at_k, 0.0);
}

TEST(EvaluateRun, AggregatesMatchStoredQuestions) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    std::vector<QARecord> data;
    for (int i = 0; i < 6; ++i) {
        data.push_back(qa("qa-0000" + std::to_string(i), "question " + std::to_string(i),
                          "score=0." + std::to_string(i + 1), b.ids[i % 4]));
    }
    const auto run = evaluate_run(data, b.index, b.corpus, *gw, config(2));
    const auto dir = test::fresh_dir("rag-agg");
    write_file_atomic(dir / "q.jsonl", questions_jsonl(run));
    const auto back = load_eval_run(dir / "q.jsonl");
    EXPECT_EQ(aggregates_to_json(back).dump(), aggregates_to_json(run).dump());

    double sum = 0;
    std::vector<std::optional<std::size_t>> ranks;
    for (const auto& q : run.questions) {
        sum += *q.answer_correctness->value;
        ranks.push_back(q.truth_rank);
    }
    EXPECT_NEAR(*run.metrics.at(kMetricAnswerCorrectness).mean, sum / 6, 1e-12);
    EXPECT_NEAR(run.recall_at_k, test::oracle_recall(ranks, 2), 1e-12);
    EXPECT_NEAR(run.mrr_at_k, test::oracle_mrr(ranks, 2), 1e-12);
}

TEST(Ablation, SingleK) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    const auto runs = ablate_chunk_count({qa("qa-00001", "q", "a", b.ids[0])}, b.index, b.corpus, *gw, config(5), {1});
    ASSERT_EQ(runs.size(), 1u);
    EXPECT_EQ(runs[0].k, 1u);
}

TEST(Ablation, TruthAtRankThreeJumpsAtThree) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    auto swapped = VectorIndex::build(b.ids, {{1, 0.1, 0, 0}, {1, 0.5, 0, 0}, {1, 1, 0, 0}, {0, 0, 0, 1}});
    const std::vector<QARecord> data{qa("qa-00001", "q1", "a", b.ids[2]), qa("qa-00002", "q2", "a", b.ids[2])};
    const auto runs = ablate_chunk_count(data, swapped, b.corpus, *gw, config(5), {1, 2, 3, 4});
    ASSERT_EQ(runs.size(), 4u);
    EXPECT_DOUBLE_EQ(runs[0].recall_at_k, 0.0);
    EXPECT_DOUBLE_EQ(runs[1].recall_at_k, 0.0);
    EXPECT_DOUBLE_EQ(runs[2].recall_at_k, 1.0);
    EXPECT_NEAR(runs[2].mrr_at_k, 1.0 / 3, 1e-12);
    EXPECT_DOUBLE_EQ(*runs[1].metrics.at(kMetricAnswerCorrectness).mean, 0.0);
    EXPECT_DOUBLE_EQ(*runs[2].metrics.at(kMetricAnswerCorrectness).mean, 1.0);
    EXPECT_DOUBLE_EQ(*runs[3].metrics.at(kMetricAnswerCorrectness).mean, 1.0);
}

TEST(Ablation, IdenticalMocksGiveFlatRows) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>(harness_world));
    const auto runs = ablate_chunk_count({qa("qa-00001", "q", "score=0.6", b.ids[2])}, b.index, b.corpus, *gw,
                                         config(5), {1, 2, 3});
    for (const auto& r : runs) {
        EXPECT_DOUBLE_EQ(*r.metrics.at(kMetricAnswerCorrectness).mean, 0.6);
        EXPECT_DOUBLE_EQ(r.recall_at_k, 1.0);
    }
    const std::string csv = ablation_csv({{"plant", runs}});
    EXPECT_NE(csv.find("metric,domain,k=1,k=2,k=3"), std::string::npos);
}

TEST(FailureLabels, Parsing) {
    EXPECT_EQ(*parse_failure_labels("failure_labels: missed top ranked"),
              (std::vector<std::string>{"Missed Top Ranked"}));
    EXPECT_TRUE(parse_failure_labels("failure_labels: none")->empty());
    EXPECT_FALSE(parse_failure_labels("failure_labels: Bad Vibes").has_value());
    EXPECT_FALSE(parse_failure_labels("nothing here").has_value());
}

TEST(FailureAnalysis, SingleLabelIsHundredPercent) {
    auto gw = test::make_gateway(std::make_shared<MockTransport>(taxonomy_from_question));
    const auto run = run_with_scores({0.2});
    const auto a = analyze_failures(run, 1.0, {gw.get(), test::chat_endpoint()});
    EXPECT_DOUBLE_EQ(a.percentages.at("Missed Top Ranked"), 100.0);
    EXPECT_DOUBLE_EQ(a.percentages.at("No Failures"), 0.0);
    EXPECT_EQ(a.quartiles[0].n, 1u);
}

TEST(FailureAnalysis, MultipleLabelsSumPastHundred) {
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall&) {
        return MockReply::text("failure_labels: Not Extracted, Wrong Format");
    }));
    const auto a = analyze_failures(run_with_scores({0.3, 0.6}), 1.0, {gw.get(), test::chat_endpoint()});
    double total = 0;
    for (const auto& [c, p] : a.percentages) total += p;
    EXPECT_DOUBLE_EQ(total, 200.0);
    EXPECT_EQ(a.quartiles[1].n, 1u);
    EXPECT_EQ(a.quartiles[2].n, 1u);
}

TEST(FailureAnalysis, PerfectScoresAreNoFailures) {
    auto mock = std::make_shared<MockTransport>(taxonomy_from_question);
    auto gw = test::make_gateway(mock);
    const auto a = analyze_failures(run_with_scores({1.0, 1.0, 1.0}), 1.0, {gw.get(), test::chat_endpoint()});
    EXPECT_DOUBLE_EQ(a.percentages.at("No Failures"), 100.0);
    EXPECT_EQ(mock->call_count(), 0u);
}

TEST(FailureAnalysis, JudgeFailuresAreExcluded) {
    auto gw = test::make_gateway(std::make_shared<MockTransport>(taxonomy_from_question));
    auto run = run_with_scores({0.1, 0.5, std::nullopt});
    run.questions[1].question = "LABELS[garbage]";
    const auto a = analyze_failures(run, 1.0, {gw.get(), test::chat_endpoint()});
    EXPECT_EQ(a.n_scored, 2u);
    EXPECT_EQ(a.n_judge_failures, 1u);
    EXPECT_TRUE(a.labels[1].judge_failure);
    EXPECT_DOUBLE_EQ(a.percentages.at("Missed Top Ranked"), 100.0);
}

TEST(SelfBias, OneByOne) {
    EvalRunResult r;
    r.metrics[kMetricAnswerCorrectness] = {0.7, 1, 0};
    const auto m = self_bias_from_runs({"gen-a"}, {"gen-a"}, {{"gen-a", {{"gen-a", r}}}});
    EXPECT_EQ(m.cells.size(), 3u);
    EXPECT_TRUE(m.cells[0].best);
    EXPECT_EQ(m.self_preferred, (std::vector<std::string>{"gen-a/answer_correctness"}));
}

TEST(SelfBias, DiagonalPreferenceIsMarked) {
    auto b = four_docs();
    auto gw = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        if (c.is_chat() && c.prompt.find("provided context") != std::string::npos) {
            return MockReply::text(c.model + " says");
        }
        if (c.is_chat() && c.prompt.find("correctness_score") != std::string::npos) {
            const std::string ref = test::last_json_string(c.prompt, "reference");
            const std::string resp = test::last_json_string(c.prompt, "response");
            return MockReply::text(resp.rfind(ref, 0) == 0 ? "correctness_score: 0.9" : "correctness_score: 0.4");
        }
        return harness_world(c);
    }));
    std::map<std::string, std::vector<QARecord>> datasets{{"gen-a", {qa("qa-00001", "q", "gen-a", b.ids[2])}},
                                                          {"gen-b", {qa("qa-00001", "q", "gen-b", b.ids[2])}}};
    const auto m = self_bias_matrix(datasets, {test::chat_endpoint("gen-a"), test::chat_endpoint("gen-b")}, b.index,
                                    b.corpus, *gw, config(1));
    EXPECT_EQ(m.self_preferred,
              (std::vector<std::string>{"gen-a/answer_correctness", "gen-b/answer_correctness"}));
    for (const auto& c : m.cells) {
        EXPECT_EQ(c.best, c.metric == kMetricAnswerCorrectness && c.dataset_origin == c.evaluated_model);
    }
}

TEST(SelfBias, SymmetricScoresHaveNoFlags) {
    EvalRunResult r;
    r.metrics[kMetricAnswerCorrectness] = {0.5, 1, 0};
    const auto m = self_bias_from_runs({"x", "y"}, {"x", "y"}, {{"x", {{"x", r}, {"y", r}}}, {"y", {{"x", r}, {"y", r}}}});
    EXPECT_TRUE(m.self_preferred.empty());
    for (const auto& c : m.cells) EXPECT_FALSE(c.best);
}
