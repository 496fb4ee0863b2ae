#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "ragcal/mock_transport.hpp"
#include "ragcal/report.hpp"
#include "ragcal/util.hpp"
#include "test_support.hpp"

using namespace ragcal;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args, std::shared_ptr<Transport> t = nullptr) {
    std::ostringstream out, err;
    const int code = t ? run_command(args, out, err, t) : run_command(args, out, err);
    return {code, out.str(), err.str()};
}

// Copy of the pipeline config with absolute paths, writing into `out`.
std::filesystem::path pipeline_config(const std::filesystem::path& dir) {
    const auto src = test::data_dir() / "pipeline";
    json j = json::parse(read_file(src / "config.json"));
    j["corpus"] = {(src / "corpus").string()};
    const std::string mock = "mock:" + (src / "mock.json").string();
    for (auto& [role, e] : j["endpoints"].items()) e["base_url"] = mock;
    for (auto& e : j["models"]) e["base_url"] = mock;
    j["output_dir"] = (dir / "out").string();
    j["datasets"] = {{"gen-a", (dir / "out" / "dataset.jsonl").string()},
                     {"gen-b", (dir / "out" / "dataset.jsonl").string()}};
    write_file_atomic(dir / "config.json", j.dump(2));
    return dir / "config.json";
}

}  // namespace

TEST(Cli, HelpExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("eval-rag"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"ingest", "--config", "/nonexistent/config.json"}).code, 2);
    EXPECT_EQ(run({"validate-metric", "--benchmark", "x"}).code, 2);
}

TEST(Cli, InvalidConfigExitsTwo) {
    const auto dir = test::fresh_dir("cli-badcfg");
    write_file_atomic(dir / "c.json", R"({"chunking": {"max_chunk_tokens": 5, "overlap_tokens": 9}})");
    const auto r = run({"ingest", "-c", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("config error"), std::string::npos);
}

TEST(Cli, EmptyCorpusExitsOne) {
    const auto dir = test::fresh_dir("cli-empty");
    std::filesystem::create_directories(dir / "docs");
    write_file_atomic(dir / "c.json", R"({"corpus": ["docs"], "output_dir": "out"})");
    const auto r = run({"ingest", "-c", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("empty corpus"), std::string::npos);
}

TEST(Cli, FullPipelineOffline) {
    const auto dir = test::fresh_dir("cli-pipeline");
    const std::string cfg = pipeline_config(dir).string();
    const std::string stsb = (test::data_dir() / "stsb_sample.tsv").string();
    const auto out = dir / "out";

    auto ok = [&](std::vector<std::string> args) {
        const auto r = run(args);
        EXPECT_EQ(r.code, 0) << args[0] << ": " << r.err;
        return r;
    };
    ok({"ingest", "-c", cfg});
    EXPECT_TRUE(std::filesystem::exists(out / "chunks.jsonl"));

    ok({"generate", "-c", cfg, "--cache-dir", (dir / "cache").string()});
    const std::string first = read_file(out / "dataset.jsonl");
    EXPECT_FALSE(first.empty());
    ok({"generate", "-c", cfg, "--cache-dir", (dir / "cache").string()});
    EXPECT_EQ(read_file(out / "dataset.jsonl"), first);

    ok({"eval-retrieval", "-c", cfg, "--k", "1,2"});
    ok({"eval-rag", "-c", cfg, "--k", "2"});
    EXPECT_EQ(read_file(out / "eval_aggregate.csv").rfind("# config_digest", 0), 0u);
    ok({"ablate-chunks", "-c", cfg});
    ok({"analyze-failures", "-c", cfg});
    ok({"self-bias", "-c", cfg});
    ok({"optimize-prompt", "-c", cfg, "--metric", "answer-correctness", "--benchmark", stsb, "--optimizer", "fewshot",
        "--train-n", "12", "--val-n", "12"});

    const auto v = run({"validate-metric", "-c", cfg, "--metric", "answer-correctness", "--benchmark", stsb, "--n",
                        "0", "--judge-base-url", "mock:" + (test::data_dir() / "pipeline" / "mock.json").string()});
    ASSERT_TRUE(v.code == 0 || v.code == 1) << v.err;
    const json align = json::parse(read_file(out / "alignment.json"));
    EXPECT_EQ(v.code == 0, align.at("report").at("valid").get<bool>());

    ok({"report", "-c", cfg, "--format", "markdown"});
    const std::string md = read_file(out / "report.md");
    ok({"report", "-c", cfg, "--format", "markdown"});
    EXPECT_EQ(read_file(out / "report.md"), md);
    for (const char* title : {"Retrieval", "RAG evaluation", "Metric alignment"}) {
        EXPECT_NE(md.find(title), std::string::npos) << title;
    }
    const auto m = ArtifactManifest::load(out);
    for (const char* a : {"dataset", "eval_rag", "ablation", "failures", "self_bias", "optimization", "alignment"}) {
        EXPECT_TRUE(m.artifacts.count(a)) << a;
    }
}

TEST(Cli, InjectedTransportReplacesNetwork) {
    const auto dir = test::fresh_dir("cli-inject");
    const std::string cfg = pipeline_config(dir).string();
    json j = json::parse(read_file(cfg));
    j["endpoints"]["embedder"]["base_url"] = "https://embeddings.invalid/v1";
    j["endpoints"]["embedder"]["api_key_env"] = "RAGCAL_CLI_TEST_KEY";
    write_file_atomic(cfg, j.dump());
    ::setenv("RAGCAL_CLI_TEST_KEY", "k", 1);
    auto mock = std::make_shared<MockTransport>([](const MockCall& c) { return test::pipeline_reply(c); });
    EXPECT_EQ(run({"ingest", "-c", cfg}).code, 0);
    EXPECT_EQ(run({"generate", "-c", cfg}, mock).code, 0);
    EXPECT_GT(mock->call_count(), 0u);
}
