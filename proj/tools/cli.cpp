#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>

#include "ragcal/alignment.hpp"
#include "ragcal/corpus.hpp"
#include "ragcal/errors.hpp"
#include "ragcal/gateway.hpp"
#include "ragcal/prompt_optimizer.hpp"
#include "ragcal/qa_generation.hpp"
#include "ragcal/rag_harness.hpp"
#include "ragcal/report.hpp"
#include "ragcal/run_config.hpp"

namespace ragcal {
namespace {

struct Options {
    std::string config;
    std::optional<std::string> output_dir;
    std::optional<std::string> cache_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;

    std::vector<std::string> corpus;
    std::optional<std::size_t> n;
    std::optional<std::string> dataset;
    std::vector<std::size_t> k_values;
    std::optional<std::size_t> k;

    std::string metric;
    std::string benchmark;
    std::string program = "default";
    std::string method;
    std::optional<std::string> judge_model;
    std::optional<std::string> judge_base_url;
    std::optional<std::string> judge_key_env;

    std::string optimizer = "copro";
    std::size_t train_n = 50;
    std::size_t val_n = 50;

    std::optional<double> threshold;
    std::optional<std::string> run;

    std::string format = "markdown";
};

class Cli {
public:
    Cli(Options opts, std::ostream& out, std::ostream& err, std::shared_ptr<Transport> transport)
        : o_(std::move(opts)), out_(out), err_(err), transport_(std::move(transport)) {}

    int dispatch(const std::string& cmd) {
        load_config(cmd);
        if (cmd == "ingest") return ingest();
        if (cmd == "generate") return generate();
        if (cmd == "eval-retrieval") return eval_retrieval();
        if (cmd == "eval-rag") return eval_rag();
        if (cmd == "ablate-chunks") return ablate_chunks();
        if (cmd == "validate-metric") return validate_metric();
        if (cmd == "optimize-prompt") return optimize_prompt();
        if (cmd == "analyze-failures") return analyze();
        if (cmd == "self-bias") return self_bias();
        if (cmd == "report") return report();
        throw ConfigError("unknown subcommand '" + cmd + "'");
    }

private:
    void load_config(const std::string& cmd) {
        if (!o_.config.empty()) {
            cfg_ = load_run_config(o_.config);
        } else {
            cfg_.base_dir = std::filesystem::current_path();
        }
        if (o_.output_dir) cfg_.output_dir = std::filesystem::absolute(*o_.output_dir).string();
        if (o_.cache_dir) cfg_.cache_dir = std::filesystem::absolute(*o_.cache_dir).string();
        if (o_.seed) cfg_.seed = *o_.seed;
        if (o_.workers) cfg_.workers = *o_.workers;
        if (!o_.corpus.empty()) {
            cfg_.corpus.clear();
            for (const auto& p : o_.corpus) cfg_.corpus.push_back(std::filesystem::absolute(p).string());
        }
        if (o_.n && cmd == "generate") cfg_.n_target = *o_.n;
        if (o_.dataset) cfg_.dataset = std::filesystem::absolute(*o_.dataset).string();
        if (!o_.k_values.empty()) cfg_.k_values = o_.k_values;
        if (o_.k) cfg_.k_retrieve = *o_.k;
        if (o_.threshold) cfg_.failure_threshold = *o_.threshold;
        cfg_.validate();
        digest_ = config_digest(cfg_);
    }

    ModelGateway& gateway() {
        if (!gateway_) {
            auto transport = transport_;
            if (!transport) {
                transport = std::make_shared<RoutingTransport>(
                    std::make_shared<HttpTransport>(std::chrono::seconds(cfg_.timeout_s)));
            }
            gateway_ = std::make_unique<ModelGateway>(transport, cfg_.gateway_options());
        }
        return *gateway_;
    }

    Corpus corpus() {
        if (cfg_.corpus.empty()) throw ConfigError("no corpus paths configured");
        std::vector<std::filesystem::path> paths;
        for (const auto& p : cfg_.corpus) paths.push_back(cfg_.resolve(p));
        Corpus c = load_corpus(paths, cfg_.chunking);
        for (const auto& e : c.errors()) err_ << "warning: skipped " << e.path << ": " << e.message << '\n';
        return c;
    }

    std::vector<QARecord> dataset(const Corpus& c, const std::filesystem::path& path) {
        if (!std::filesystem::exists(path)) throw PipelineError("missing dataset " + path.string());
        auto records = load_qa_dataset(path);
        if (records.empty()) throw PipelineError("dataset " + path.string() + " is empty");
        for (const auto& r : records) {
            if (c.find_chunk(r.chunk_id) == nullptr) {
                throw PipelineError("dataset record " + r.qa_id + " cites chunk " + r.chunk_id +
                                    " which is not in the corpus (re-ingest with the same chunking settings)");
            }
        }
        return records;
    }

    RagConfig rag_config() {
        RagConfig r;
        r.embedder = cfg_.endpoint("embedder");
        r.generator = cfg_.endpoint("generator");
        r.judge = cfg_.endpoint("judge");
        r.k_retrieve = cfg_.k_retrieve;
        r.generation_temperature = cfg_.rag_temperature;
        r.correctness_program = resolve_program("answer-correctness", program_ref(cfg_.correctness_program));
        r.relevance_questions = cfg_.relevance_questions;
        r.workers = cfg_.workers;
        r.validate();
        return r;
    }

    // Program paths in the config resolve against the config directory.
    std::string program_ref(const std::string& which) const {
        if (which.empty() || which == "default" || which == "optimized" || which == "handcrafted") return which;
        return cfg_.resolve(which).string();
    }

    json provenance(const std::map<std::string, std::string>& models) {
        json m = json::object();
        for (const auto& [role, name] : models) m[role] = name;
        json p{{"models", m}};
        if (gateway_) p["gateway"] = to_json(gateway_->stats());
        return p;
    }

    void write(const std::string& command, const std::map<std::string, std::pair<std::string, std::string>>& files,
               const json& prov) {
        auto stamped = files;
        for (auto& [name, f] : stamped) {
            if (std::filesystem::path(f.first).extension() == ".csv") f.second = "# config_digest=" + digest_ + "\n" + f.second;
        }
        write_artifacts(cfg_.output_path(), command, cfg_, stamped, prov);
        for (const auto& [name, f] : files) out_ << "wrote " << (cfg_.output_path() / f.first).string() << '\n';
    }

    static std::string dump(const json& j) { return j.dump(2) + "\n"; }

    int ingest() {
        const Corpus c = corpus();
        json docs = json::array();
        json warnings = json::array();
        for (const auto& d : c.documents()) {
            docs.push_back(document_to_json(d));
            for (const auto& w : d.warnings) warnings.push_back(d.doc_id + ": " + w);
        }
        json errors = json::array();
        for (const auto& e : c.errors()) errors.push_back({{"path", e.path}, {"message", e.message}});
        const json summary{{"config_digest", digest_},
                           {"n_documents", c.documents().size()},
                           {"n_chunks", c.chunks().size()},
                           {"documents", docs},
                           {"errors", errors},
                           {"warnings", warnings}};
        write("ingest", {{"chunks", {"chunks.jsonl", chunk_manifest_jsonl(c)}}, {"ingest", {"ingest.json", dump(summary)}}},
              provenance({}));
        out_ << c.documents().size() << " documents, " << c.chunks().size() << " chunks\n";
        return 0;
    }

    int generate() {
        const Corpus c = corpus();
        QAGenerationConfig q;
        q.generator = cfg_.endpoint("generator");
        q.judge = cfg_.endpoint("judge");
        q.embedder = cfg_.endpoint("embedder");
        q.thresholds = cfg_.thresholds;
        q.generation_temperature = cfg_.generation_temperature;
        q.budget_multiplier = cfg_.budget_multiplier;
        q.workers = cfg_.workers;
        q.relevance_questions = cfg_.relevance_questions;
        const GenerationResult res =
            generate_dataset(c, cfg_.n_target, gateway(), q, derive_seed(cfg_.seed, "generate"));
        for (const auto& w : res.warnings) err_ << "warning: " << w << '\n';
        std::vector<json> rows;
        for (const auto& r : res.records) rows.push_back(to_json(r));
        const json stats{{"config_digest", digest_}, {"stats", to_json(res.stats)}, {"warnings", res.warnings}};
        write("generate",
              {{"dataset", {"dataset.jsonl", to_jsonl(rows)}}, {"generation", {"generation.json", dump(stats)}}},
              provenance({{"generator", q.generator.model_name},
                          {"judge", q.judge.model_name},
                          {"embedder", q.embedder.model_name}}));
        out_ << res.stats.accepted << " of " << cfg_.n_target << " records accepted in " << res.stats.attempts
             << " attempts\n";
        return 0;
    }

    int eval_retrieval() {
        const Corpus c = corpus();
        const auto data = dataset(c, cfg_.dataset_path());
        const ModelEndpoint embedder = cfg_.endpoint("embedder");
        const VectorIndex index = build_corpus_index(c, gateway(), embedder);
        const std::size_t k_max = *std::max_element(cfg_.k_values.begin(), cfg_.k_values.end());
        const auto retrievals = retrieve_dataset(data, index, gateway(), embedder, k_max);
        std::vector<RetrievalOutcome> outcomes;
        std::vector<json> rows;
        for (std::size_t i = 0; i < data.size(); ++i) {
            outcomes.push_back(make_outcome(retrievals[i], data[i].chunk_id));
            json row = to_json(retrievals[i]);
            row["truth_chunk_id"] = data[i].chunk_id;
            row["truth_rank"] = outcomes.back().rank ? json(*outcomes.back().rank) : json(nullptr);
            rows.push_back(row);
        }
        json table = json::array();
        for (std::size_t k : cfg_.k_values) {
            table.push_back({{"k", k}, {"recall_at_k", recall_at_k(outcomes, k)}, {"mrr_at_k", mrr_at_k(outcomes, k)}});
        }
        const json summary{{"config_digest", digest_},
                           {"embedder", embedder.model_name},
                           {"domain", cfg_.domain},
                           {"n", data.size()},
                           {"rows", table}};
        write("eval-retrieval",
              {{"retrieval", {"retrieval.json", dump(summary)}}, {"retrievals", {"retrievals.jsonl", to_jsonl(rows)}}},
              provenance({{"embedder", embedder.model_name}}));
        for (const auto& r : table) {
            out_ << "k=" << r["k"].get<std::size_t>() << " recall=" << format_fixed(r["recall_at_k"], 4)
                 << " mrr=" << format_fixed(r["mrr_at_k"], 4) << '\n';
        }
        return 0;
    }

    int eval_rag() {
        const Corpus c = corpus();
        const auto data = dataset(c, cfg_.dataset_path());
        const RagConfig rc = rag_config();
        const VectorIndex index = build_corpus_index(c, gateway(), rc.embedder);
        EvalRunResult run = evaluate_run(data, index, c, gateway(), rc);
        run.label = cfg_.domain;
        const json summary{{"config_digest", digest_},
                           {"domain", cfg_.domain},
                           {"generator", rc.generator.model_name},
                           {"aggregates", aggregates_to_json(run)}};
        write("eval-rag",
              {{"eval_questions", {"eval_questions.jsonl", questions_jsonl(run)}},
               {"eval_rag", {"eval_rag.json", dump(summary)}},
               {"eval_aggregate_csv", {"eval_aggregate.csv", aggregate_csv({run})}}},
              provenance({{"embedder", rc.embedder.model_name},
                          {"generator", rc.generator.model_name},
                          {"judge", rc.judge.model_name}}));
        out_ << aggregate_csv({run});
        return 0;
    }

    int ablate_chunks() {
        const Corpus c = corpus();
        const auto data = dataset(c, cfg_.dataset_path());
        const RagConfig rc = rag_config();
        const VectorIndex index = build_corpus_index(c, gateway(), rc.embedder);
        const auto runs = ablate_chunk_count(data, index, c, gateway(), rc, cfg_.k_values);
        json aggs = json::array();
        for (const auto& r : runs) aggs.push_back(aggregates_to_json(r));
        const json summary{{"config_digest", digest_}, {"domain", cfg_.domain}, {"runs", aggs}};
        write("ablate-chunks",
              {{"ablation", {"ablation.json", dump(summary)}},
               {"ablation_csv", {"ablation.csv", ablation_csv({{cfg_.domain, runs}})}}},
              provenance({{"embedder", rc.embedder.model_name},
                          {"generator", rc.generator.model_name},
                          {"judge", rc.judge.model_name}}));
        out_ << ablation_csv({{cfg_.domain, runs}});
        return 0;
    }

    ModelEndpoint judge_endpoint() {
        ModelEndpoint e;
        if (cfg_.has_endpoint("judge")) {
            e = cfg_.endpoint("judge");
        } else {
            e.base_url = "https://api.openai.com/v1";
            e.api_key_env = "OPENAI_API_KEY";
            e.model_name = "gpt-4o-mini";
        }
        if (o_.judge_model) e.model_name = *o_.judge_model;
        if (o_.judge_base_url) e.base_url = *o_.judge_base_url;
        if (o_.judge_key_env) e.api_key_env = *o_.judge_key_env;
        e.validate();
        return e;
    }

    BenchmarkSample benchmark(const std::string& metric, std::size_t n, std::uint64_t seed) {
        if (o_.benchmark.empty()) throw ConfigError("--benchmark is required");
        const std::filesystem::path path = std::filesystem::absolute(o_.benchmark);
        BenchmarkSample s = metric == "answerability" ? load_squad2(path, n, seed) : load_stsb(path, n, seed);
        if (s.rows_skipped > 0) err_ << "warning: skipped " << s.rows_skipped << " malformed benchmark rows\n";
        return s;
    }

    void check_metric() const {
        if (o_.metric != "answer-correctness" && o_.metric != "answerability") {
            throw ConfigError("--metric must be answer-correctness or answerability");
        }
    }

    int validate_metric() {
        check_metric();
        const std::size_t n = o_.n.value_or(500);
        const auto sample = benchmark(o_.metric, n, derive_seed(cfg_.seed, "validate-metric/sample"));
        const PromptProgram program = resolve_program(o_.metric, program_ref(o_.program));
        const ModelEndpoint judge = judge_endpoint();
        const AlignmentReport rep =
            validate_metric_alignment(program, sample.examples, JudgeClient{&gateway(), judge}, cfg_.workers);
        const std::string method = o_.method.empty() ? (o_.program == "default" ? "default" : o_.program) : o_.method;
        const json summary{{"config_digest", digest_},
                           {"method", method},
                           {"benchmark", std::filesystem::path(o_.benchmark).filename().string()},
                           {"rows_skipped", sample.rows_skipped},
                           {"report", to_json(rep)}};
        const std::string md = markdown_header() + markdown_row(rep, method);
        write("validate-metric",
              {{"alignment", {"alignment.json", dump(summary)}}, {"alignment_md", {"alignment.md", md}}},
              provenance({{"judge", judge.model_name}}));
        out_ << md;
        return rep.valid ? 0 : 1;
    }

    int optimize_prompt() {
        check_metric();
        const std::size_t total = o_.train_n + o_.val_n;
        auto sample = benchmark(o_.metric, total, derive_seed(cfg_.seed, "optimize-prompt/sample"));
        const std::vector<LabeledExample> train(sample.examples.begin(),
                                                sample.examples.begin() + static_cast<std::ptrdiff_t>(o_.train_n));
        const std::vector<LabeledExample> val(sample.examples.begin() + static_cast<std::ptrdiff_t>(o_.train_n),
                                              sample.examples.end());
        const PromptProgram base = resolve_program(o_.metric, program_ref(o_.program == "default" ? "handcrafted" : o_.program));
        const ModelEndpoint judge = judge_endpoint();
        const JudgeClient jc{&gateway(), judge};
        const std::uint64_t seed = derive_seed(cfg_.seed, "optimize-prompt/" + o_.optimizer);

        OptimizationTrace trace;
        std::map<std::string, std::string> models{{"judge", judge.model_name}};
        if (o_.optimizer == "fewshot") {
            trace.optimizer = "labeled_few_shot";
            trace.train_size = train.size();
            trace.val_size = val.size();
            trace.best_program = labeled_few_shot(base, train, std::min(cfg_.few_shot_k, train.size()), seed);
            trace.validation = evaluate_program(trace.best_program, val, jc, cfg_.workers);
            TraceCandidate c;
            c.digest = trace.best_program.digest();
            c.instruction = trace.best_program.instruction;
            c.n_demos = trace.best_program.demos.size();
            c.status = "unscored on train";
            trace.candidates.push_back(c);
            trace.iterations = 1;
        } else {
            const ProposerClient proposer{&gateway(), cfg_.endpoint("proposer"), 0.7};
            models["proposer"] = proposer.endpoint.model_name;
            if (o_.optimizer == "copro") {
                trace = copro_optimize(base, train, val, jc, proposer,
                                       CoproOptions{cfg_.breadth, cfg_.depth, seed, cfg_.workers});
            } else if (o_.optimizer == "mipro") {
                MiproOptions mo;
                mo.trials = cfg_.trials;
                mo.seed = seed;
                mo.workers = cfg_.workers;
                trace = mipro_lite(base, train, val, jc, proposer, mo);
            } else {
                throw ConfigError("--optimizer must be copro, mipro or fewshot");
            }
        }
        const json summary{{"config_digest", digest_}, {"metric", o_.metric}, {"trace", to_json(trace)}};
        write("optimize-prompt",
              {{"optimization", {"optimization.json", dump(summary)}},
               {"optimized_program", {"optimized_program.json", dump(trace.best_program.to_json())}}},
              provenance(models));
        out_ << trace.optimizer << ": validation rho="
             << (trace.validation.score ? format_fixed(*trace.validation.score, 3) : std::string("n/a")) << '\n';
        return 0;
    }

    int analyze() {
        const std::filesystem::path path =
            o_.run ? std::filesystem::absolute(*o_.run) : cfg_.output_path() / "eval_questions.jsonl";
        if (!std::filesystem::exists(path)) throw PipelineError("missing artifact 'eval_questions' (" + path.string() + ")");
        const EvalRunResult run = load_eval_run(path, cfg_.domain);
        const ModelEndpoint judge = cfg_.endpoint("taxonomy_judge");
        const FailureAnalysis a =
            analyze_failures(run, cfg_.failure_threshold, JudgeClient{&gateway(), judge}, cfg_.workers);
        const json summary{{"config_digest", digest_}, {"analysis", to_json(a)}};
        write("analyze-failures",
              {{"failures", {"failures.json", dump(summary)}},
               {"failures_csv", {"failures.csv", failure_counts_csv(a)}},
               {"failure_quartiles_csv", {"failure_quartiles.csv", failure_quartiles_csv(a)}}},
              provenance({{"taxonomy_judge", judge.model_name}}));
        out_ << failure_counts_csv(a);
        return 0;
    }

    int self_bias() {
        if (cfg_.datasets.empty() || cfg_.models.empty()) {
            throw ConfigError("self-bias needs 'datasets' and 'models' in the config");
        }
        const Corpus c = corpus();
        std::map<std::string, std::vector<QARecord>> data;
        for (const auto& [origin, p] : cfg_.datasets) data[origin] = dataset(c, cfg_.resolve(p));
        const RagConfig rc = rag_config();
        std::vector<ModelEndpoint> models;
        std::map<std::string, std::string> names{{"embedder", rc.embedder.model_name}, {"judge", rc.judge.model_name}};
        for (std::size_t i = 0; i < cfg_.models.size(); ++i) {
            ModelEndpoint m = cfg_.models[i];
            if (m.is_mock()) m.base_url = "mock:" + cfg_.resolve(m.base_url.substr(5)).string();
            names["model_" + std::to_string(i + 1)] = m.model_name;
            models.push_back(m);
        }
        const VectorIndex index = build_corpus_index(c, gateway(), rc.embedder);
        const SelfBiasMatrix m = self_bias_matrix(data, models, index, c, gateway(), rc);
        const json summary{{"config_digest", digest_}, {"matrix", to_json(m)}};
        write("self-bias",
              {{"self_bias", {"self_bias.json", dump(summary)}}, {"self_bias_csv", {"self_bias.csv", self_bias_csv(m)}}},
              provenance(names));
        out_ << self_bias_csv(m);
        return 0;
    }

    int report() {
        for (const auto& p : emit_report(cfg_.output_path(), report_format_from_string(o_.format))) {
            out_ << "wrote " << p.string() << '\n';
        }
        return 0;
    }

    Options o_;
    std::ostream& out_;
    std::ostream& err_;
    std::shared_ptr<Transport> transport_;
    RunConfig cfg_;
    std::string digest_;
    std::unique_ptr<ModelGateway> gateway_;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("-c,--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", o.output_dir, "Directory for artifacts (overrides config)");
    sub->add_option("--cache-dir", o.cache_dir, "Response cache directory (overrides config)");
    sub->add_option("--seed", o.seed, "Top-level seed (overrides config)");
    sub->add_option("--workers", o.workers, "Parallel workers (overrides config)");
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    return run_command(args, out, err, nullptr);
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                std::shared_ptr<Transport> transport) {
    CLI::App app{"ragcal: build, validate and run evaluations of retrieval-augmented generation systems", "ragcal"};
    app.require_subcommand(1);
    Options o;

    auto* ingest = app.add_subcommand("ingest", "Load and chunk the corpus; write the chunk manifest");
    add_common(ingest, o);
    ingest->add_option("--corpus", o.corpus, "Corpus files or directories (overrides config)");

    auto* generate = app.add_subcommand("generate", "Generate and filter a synthetic QA dataset");
    add_common(generate, o);
    generate->add_option("--corpus", o.corpus, "Corpus files or directories");
    generate->add_option("-n,--n", o.n, "Number of QA records to accept");

    auto* retrieval = app.add_subcommand("eval-retrieval", "Recall@k and MRR@k of the embedder over a dataset");
    add_common(retrieval, o);
    retrieval->add_option("--dataset", o.dataset, "QA dataset JSONL");
    retrieval->add_option("--k", o.k_values, "k values")->delimiter(',');

    auto* rag = app.add_subcommand("eval-rag", "Answer every question with RAG and score the answers");
    add_common(rag, o);
    rag->add_option("--dataset", o.dataset, "QA dataset JSONL");
    rag->add_option("--k", o.k, "Chunks retrieved per question");

    auto* ablate = app.add_subcommand("ablate-chunks", "Evaluate RAG across retrieved-chunk counts");
    add_common(ablate, o);
    ablate->add_option("--dataset", o.dataset, "QA dataset JSONL");
    ablate->add_option("--k", o.k_values, "k values")->delimiter(',');

    auto* validate = app.add_subcommand("validate-metric", "Correlate a judge metric with human labels");
    add_common(validate, o);
    validate->add_option("--metric", o.metric, "answer-correctness or answerability")->required();
    validate->add_option("--benchmark", o.benchmark, "STS-B TSV/CSV or SQuAD 2.0 JSON")->required();
    validate->add_option("-n,--n", o.n, "Sampled examples (0 = all; default 500)");
    validate->add_option("--program", o.program, "optimized, handcrafted or a program JSON path");
    validate->add_option("--method", o.method, "Method label for the report row");
    validate->add_option("--judge-model", o.judge_model, "Judge model name");
    validate->add_option("--judge-base-url", o.judge_base_url, "Judge API base URL");
    validate->add_option("--judge-key-env", o.judge_key_env, "Environment variable holding the judge API key");

    auto* optimize = app.add_subcommand("optimize-prompt", "Optimize a judge prompt against labeled data");
    add_common(optimize, o);
    optimize->add_option("--metric", o.metric, "answer-correctness or answerability")->required();
    optimize->add_option("--benchmark", o.benchmark, "STS-B TSV/CSV or SQuAD 2.0 JSON")->required();
    optimize->add_option("--optimizer", o.optimizer, "copro, mipro or fewshot");
    optimize->add_option("--train-n", o.train_n, "Training examples");
    optimize->add_option("--val-n", o.val_n, "Validation examples");
    optimize->add_option("--program", o.program, "Starting program (default handcrafted)");
    optimize->add_option("--judge-model", o.judge_model, "Judge model name");
    optimize->add_option("--judge-base-url", o.judge_base_url, "Judge API base URL");
    optimize->add_option("--judge-key-env", o.judge_key_env, "Environment variable holding the judge API key");

    auto* failures = app.add_subcommand("analyze-failures", "Label low-correctness answers with failure reasons");
    add_common(failures, o);
    failures->add_option("--run", o.run, "Per-question evaluation JSONL (default <output>/eval_questions.jsonl)");
    failures->add_option("--threshold", o.threshold, "Answers scoring below this are analyzed (default 1.0)");

    auto* bias = app.add_subcommand("self-bias", "Cross-evaluate generator models on each other's datasets");
    add_common(bias, o);

    auto* rep = app.add_subcommand("report", "Render tables from the artifacts in the output directory");
    add_common(rep, o);
    rep->add_option("--format", o.format, "markdown, csv or json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        Cli cli(o, out, err, std::move(transport));
        return cli.dispatch(cmd);
    } catch (const ConfigError& e) {
        err << "ragcal " << cmd << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "ragcal " << cmd << ": " << e.what() << '\n';
        return 1;
    }
}

}  // namespace ragcal
