#include <benchmark/benchmark.h>

#include <random>

#include "ragcal/alignment.hpp"
#include "ragcal/corpus.hpp"
#include "ragcal/retrieval_metrics.hpp"
#include "ragcal/vector_index.hpp"

using namespace ragcal;

static std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> out(n, std::vector<double>(dim));
    for (auto& v : out) {
        for (auto& x : v) x = normal(rng);
    }
    return out;
}

static void BM_IndexQuery(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("doc.txt:" + std::to_string(i));
    const auto index = VectorIndex::build(ids, random_vectors(n, 256, 1));
    const auto q = random_vectors(1, 256, 2)[0];
    for (auto _ : state) benchmark::DoNotOptimize(index.query_top_k(q, 10));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_IndexQuery)->Arg(1000)->Arg(10000);

static void BM_Spearman(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(rng() % 6);
        y[i] = static_cast<double>(rng() % 21) / 20.0;
    }
    for (auto _ : state) benchmark::DoNotOptimize(spearman_rho(x, y));
}
BENCHMARK(BM_Spearman)->Arg(500)->Arg(5000);

static void BM_ChunkDocument(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "token" + std::to_string(i % 97) + (i % 13 == 0 ? ". " : " ");
    const Document doc{"bench.txt", "bench.txt", text, count_tokens(text), {}};
    const ChunkingConfig cfg{800, 400, {}};
    for (auto _ : state) benchmark::DoNotOptimize(chunk_document(doc, cfg));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ChunkDocument)->Arg(5000)->Arg(50000);

static void BM_RetrievalMetrics(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::vector<RetrievalOutcome> outcomes;
    for (int i = 0; i < 1000; ++i) {
        std::optional<std::size_t> r;
        if (rng() % 3) r = 1 + rng() % 10;
        outcomes.push_back({"q", "t", r, 10});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(recall_at_k(outcomes, 5));
        benchmark::DoNotOptimize(mrr_at_k(outcomes, 5));
    }
}
BENCHMARK(BM_RetrievalMetrics);
BENCHMARK_MAIN();
