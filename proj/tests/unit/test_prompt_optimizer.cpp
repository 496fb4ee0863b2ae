#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "ragcal/errors.hpp"
#include "ragcal/prompt_optimizer.hpp"
#include "ragcal/util.hpp"
#include "test_support.hpp"

using namespace ragcal;

namespace {

std::vector<LabeledExample> labeled(std::size_t n, std::size_t offset = 0) {
    std::mt19937_64 rng(31 + offset);
    std::vector<LabeledExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double gold = static_cast<double>(rng() % 21) / 20.0;
        out.push_back({{{"response", "resp " + std::to_string(i + offset)},
                        {"reference", "gold=" + format_fixed(gold, 4)}},
                       gold});
    }
    return out;
}

// Instructions carry "QUALITY=<k>": the judge flips every k-th answer
// (k = 0 never flips). Proposals are scripted per candidate index.
MockReply optimizer_world(const MockCall& c, const std::map<std::string, std::string>& proposals) {
    const std::string& p = c.prompt;
    std::smatch m;
    if (p.find("evaluation prompt used by a language model judge") != std::string::npos) {
        if (std::regex_search(p, m, std::regex("(?:variant|candidate) #(\\d+)"))) {
            auto it = proposals.find(m[1].str());
            if (it != proposals.end()) return MockReply::text(it->second);
        }
        return MockReply::text("");
    }
    const std::string ref = test::last_json_string(p, "reference");
    const std::string resp = test::last_json_string(p, "response");
    double gold = std::stod(ref.substr(5));
    int flip_every = 0;
    if (std::regex_search(p, m, std::regex("QUALITY=(\\d+)"))) flip_every = std::stoi(m[1].str());
    const int idx = std::stoi(resp.substr(5));
    if (flip_every > 0 && idx % flip_every == 0) gold = 1.0 - gold;
    return MockReply::text("correctness_score: " + format_fixed(gold, 4));
}

PromptProgram seed_program(int quality) {
    PromptProgram p = answer_correctness_handcrafted();
    p.instruction = "Grade the response. QUALITY=" + std::to_string(quality) + ". Reply with correctness_score: <value>.";
    return p;
}

std::string instruction(int quality, const std::string& tag) {
    return "Grade carefully (" + tag + "). QUALITY=" + std::to_string(quality) + ". Reply with correctness_score: <v>.";
}

struct World {
    std::shared_ptr<MockTransport> mock;
    std::unique_ptr<ModelGateway> gw;
    JudgeClient judge() { return {gw.get(), test::chat_endpoint("judge")}; }
    ProposerClient proposer() { return {gw.get(), test::chat_endpoint("proposer"), 0.7}; }
};

World world(std::map<std::string, std::string> proposals) {
    World w;
    w.mock = std::make_shared<MockTransport>([proposals](const MockCall& c) { return optimizer_world(c, proposals); });
    w.gw = test::make_gateway(w.mock);
    return w;
}

void expect_non_decreasing(const OptimizationTrace& t) {
    std::optional<double> prev;
    for (const auto& b : t.best_so_far) {
        if (prev) {
            ASSERT_TRUE(b.has_value());
            EXPECT_GE(*b, *prev);
        }
        prev = b;
    }
}

}  // namespace

TEST(EvaluateProgram, EchoReversedConstant) {
    auto w = world({});
    const auto ex = labeled(20);
    EXPECT_NEAR(*evaluate_program(seed_program(0), ex, w.judge(), 2).score, 1.0, 1e-12);

    auto rev = test::make_gateway(std::make_shared<MockTransport>([](const MockCall& c) {
        const double g = std::stod(test::last_json_string(c.prompt, "reference").substr(5));
        return MockReply::text("correctness_score: " + format_fixed(1.0 - g, 4));
    }));
    EXPECT_NEAR(*evaluate_program(seed_program(0), ex, {rev.get(), test::chat_endpoint()}, 2).score, -1.0, 1e-12);

    auto constant = test::make_gateway(MockTransport::from_script(json{{"default_response", "correctness_score: 0.5"}}));
    const auto r = evaluate_program(seed_program(0), ex, {constant.get(), test::chat_endpoint()}, 2);
    EXPECT_FALSE(r.valid);
    EXPECT_EQ(r.invalid_reason, "zero variance");
    EXPECT_FALSE(r.score.has_value());
}

TEST(EvaluateProgram, NeedsTenExamples) {
    auto w = world({});
    EXPECT_THROW(evaluate_program(seed_program(0), labeled(9), w.judge()), InvalidArgument);
}

TEST(LabeledFewShot, Examples) {
    const auto pool = labeled(30);
    const PromptProgram base = answer_correctness_handcrafted();
    EXPECT_EQ(labeled_few_shot(base, pool, 0, 1), base);
    const auto eight = labeled_few_shot(base, pool, 8, 1);
    EXPECT_EQ(eight.demos.size(), 8u);
    EXPECT_EQ(eight.instruction, base.instruction);
    EXPECT_EQ(labeled_few_shot(base, pool, 8, 1), eight);
    EXPECT_NE(labeled_few_shot(base, pool, 8, 2), eight);
    EXPECT_THROW(labeled_few_shot(base, pool, 31, 1), InvalidArgument);
}

TEST(Copro, FixedPointProposer) {
    const PromptProgram seed = seed_program(3);
    std::map<std::string, std::string> props;
    for (int i = 1; i <= 4; ++i) props[std::to_string(i)] = seed.instruction;
    auto w = world(props);
    const auto t = copro_optimize(seed, labeled(20), labeled(12, 100), w.judge(), w.proposer(), {4, 2, 1, 2});
    for (const auto& c : t.candidates) EXPECT_EQ(c.digest, seed.digest());
    EXPECT_EQ(t.best_program, seed);
    expect_non_decreasing(t);
}

TEST(Copro, BetterRewriteBecomesBest) {
    std::map<std::string, std::string> props{{"1", instruction(3, "a")},
                                             {"2", instruction(0, "b")},
                                             {"3", instruction(2, "c")}};
    auto w = world(props);
    const auto t = copro_optimize(seed_program(3), labeled(20), labeled(12, 100), w.judge(), w.proposer(), {3, 1, 1, 1});
    EXPECT_EQ(t.best_program.instruction, instruction(0, "b"));
    EXPECT_NEAR(*t.best_train_score, 1.0, 1e-12);
    ASSERT_EQ(t.best_so_far.size(), 2u);
    expect_non_decreasing(t);
    EXPECT_TRUE(t.validation.valid);
}

TEST(Copro, DepthZeroKeepsSeedOnly) {
    auto w = world({});
    const auto t = copro_optimize(seed_program(2), labeled(20), labeled(12, 100), w.judge(), w.proposer(), {4, 0, 1, 1});
    ASSERT_EQ(t.candidates.size(), 1u);
    EXPECT_EQ(t.best_program, seed_program(2));
}

TEST(Copro, RewritesWithoutOutputFieldRejected) {
    std::map<std::string, std::string> props{{"1", "Grade it. QUALITY=0."}, {"2", instruction(4, "kept")}};
    auto w = world(props);
    const auto t = copro_optimize(seed_program(2), labeled(20), labeled(12, 100), w.judge(), w.proposer(), {2, 1, 1, 1});
    ASSERT_EQ(t.candidates.size(), 3u);
    EXPECT_EQ(t.candidates[1].status.rfind("rejected", 0), 0u);
    EXPECT_FALSE(t.candidates[1].train_score.has_value());
    EXPECT_NE(t.best_program.instruction.find("correctness_score"), std::string::npos);
}

TEST(Copro, TrainValOverlapRejected) {
    auto w = world({});
    const auto train = labeled(20);
    EXPECT_THROW(copro_optimize(seed_program(1), train, train, w.judge(), w.proposer(), {}), InvalidArgument);
}

TEST(Copro, TraceIsReproducible) {
    std::map<std::string, std::string> props{{"1", instruction(2, "a")}, {"2", instruction(5, "b")}};
    auto a = world(props);
    auto b = world(props);
    const auto ta = copro_optimize(seed_program(3), labeled(20), labeled(12, 100), a.judge(), a.proposer(), {2, 2, 9, 2});
    const auto tb = copro_optimize(seed_program(3), labeled(20), labeled(12, 100), b.judge(), b.proposer(), {2, 2, 9, 1});
    EXPECT_EQ(to_json(ta).dump(), to_json(tb).dump());
}

TEST(MiproLite, SingleTrial) {
    auto w = world({{"1", instruction(2, "only")}});
    MiproOptions o;
    o.trials = 1;
    const auto t = mipro_lite(seed_program(3), labeled(20), labeled(12, 100), w.judge(), w.proposer(), o);
    ASSERT_EQ(t.candidates.size(), 1u);
    EXPECT_EQ(t.best_program.instruction, instruction(2, "only"));
}

TEST(MiproLite, BestIsMaxTrial) {
    auto w = world({{"1", instruction(2, "low")}, {"2", instruction(0, "high")}, {"3", instruction(4, "mid")}});
    MiproOptions o;
    o.trials = 3;
    o.demo_sizes = {0, 2};
    const auto t = mipro_lite(seed_program(3), labeled(20), labeled(12, 100), w.judge(), w.proposer(), o);
    ASSERT_EQ(t.candidates.size(), 3u);
    EXPECT_EQ(t.best_program.instruction, instruction(0, "high"));
    EXPECT_EQ(t.candidates[1].round, 2u);
    expect_non_decreasing(t);
}

TEST(MiproLite, ZeroDemoCandidateIsValid) {
    auto w = world({{"1", instruction(0, "bare")}});
    MiproOptions o;
    o.trials = 1;
    o.demo_sizes = {0};
    const auto t = mipro_lite(seed_program(3), labeled(20), labeled(12, 100), w.judge(), w.proposer(), o);
    EXPECT_EQ(t.best_program.demos.size(), 0u);
    EXPECT_EQ(t.candidates[0].status, "scored");
}

TEST(MiproLite, ProposerFailureIsRecorded) {
    auto w = world({});
    MiproOptions o;
    o.trials = 2;
    const auto t = mipro_lite(seed_program(3), labeled(20), labeled(12, 100), w.judge(), w.proposer(), o);
    ASSERT_EQ(t.candidates.size(), 2u);
    EXPECT_EQ(t.candidates[0].status.rfind("proposer failure", 0), 0u);
    EXPECT_EQ(t.best_program, seed_program(3));
}
