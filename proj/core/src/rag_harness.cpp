#include "ragcal/rag_harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

std::string numbered_contexts(const std::vector<std::string>& contexts) {
    std::string out;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] " + contexts[i];
    }
    return out;
}

json optional_score(const std::optional<MetricScore>& s) { return s ? to_json(*s) : json(nullptr); }

std::optional<MetricScore> optional_score_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return metric_score_from_json(j.at(key));
}

RetrievalResult retrieval_from_json(const json& j) {
    RetrievalResult r;
    r.query_id = j.value("query_id", "");
    r.k = j.value("k", std::size_t{0});
    for (const auto& s : j.value("ranked", json::array())) {
        r.ranked.push_back({s.at("chunk_id").get<std::string>(), s.at("score").get<double>()});
    }
    return r;
}

RetrievalResult truncate(RetrievalResult r, std::size_t k) {
    if (r.ranked.size() > k) r.ranked.resize(k);
    r.k = k;
    return r;
}

bool overlaps_truth(const Corpus& corpus, const Chunk* truth, const RetrievalResult& r) {
    if (truth == nullptr) return false;
    for (const auto& s : r.ranked) {
        const Chunk* c = corpus.find_chunk(s.chunk_id);
        if (c == nullptr || c->doc_id != truth->doc_id || c->chunk_id == truth->chunk_id) continue;
        if (c->token_span.begin < truth->token_span.end && truth->token_span.begin < c->token_span.end) return true;
    }
    return false;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_value(const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string(); }

std::string normalize_label(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : to_lower(s)) {
        if (c == '-' || c == '_' || std::isspace(static_cast<unsigned char>(c)) != 0) {
            space = !out.empty();
            continue;
        }
        if (c == '"' || c == '\'' || c == '*' || c == '.' || c == '`' || c == '[' || c == ']') continue;
        if (space) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

const std::vector<std::string> kRunMetrics = {kMetricAnswerCorrectness, kMetricFaithfulness, kMetricAnswerRelevance};

const std::optional<MetricScore>& metric_of(const QuestionResult& q, const std::string& name) {
    if (name == kMetricAnswerCorrectness) return q.answer_correctness;
    if (name == kMetricFaithfulness) return q.faithfulness;
    return q.answer_relevance;
}

}  // namespace

void RagConfig::validate() const {
    if (k_retrieve < 1) throw ConfigError("k_retrieve must be >= 1");
    embedder.validate();
    generator.validate();
    judge.validate();
    correctness_program.validate();
}

VectorIndex build_corpus_index(const Corpus& corpus, ModelGateway& gateway, const ModelEndpoint& embedder) {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& c : corpus.chunks()) {
        ids.push_back(c.chunk_id);
        texts.push_back(c.text);
    }
    return VectorIndex::build(std::move(ids), gateway.embed_texts(texts, embedder));
}

RetrievalResult retrieve(const std::string& question, const std::string& query_id, const VectorIndex& index,
                         ModelGateway& gateway, const ModelEndpoint& embedder, std::size_t k) {
    const auto vecs = gateway.embed_texts({question}, embedder);
    return index.query_top_k(vecs.at(0), k, query_id);
}

RagAnswer generate_with_contexts(const std::string& question, RetrievalResult retrieval, const Corpus& corpus,
                                 ModelGateway& gateway, const RagConfig& cfg) {
    RagAnswer out;
    for (const auto& s : retrieval.ranked) {
        const Chunk* c = corpus.find_chunk(s.chunk_id);
        if (c == nullptr) throw PipelineError("index refers to chunk " + s.chunk_id + " missing from the corpus");
        out.contexts.push_back(c->text);
    }
    out.retrieval = std::move(retrieval);
    ChatRequest req;
    req.model_name = cfg.generator.model_name;
    req.temperature = cfg.generation_temperature;
    req.messages = {{"system", std::string(builtin_asset("templates/rag_generator_system.txt"))},
                    {"user", render_template(builtin_asset("templates/rag_generator_user.txt"),
                                             {{"contexts", numbered_contexts(out.contexts)}, {"question", question}})}};
    try {
        out.answer = trim(gateway.chat_complete(cfg.generator, req).text);
        if (out.answer.empty()) out.error = "empty generation";
    } catch (const TransportError& e) {
        out.error = e.what();
    } catch (const ProtocolError& e) {
        out.error = e.what();
    }
    return out;
}

RagAnswer answer_with_rag(const std::string& question, const std::string& query_id, const VectorIndex& index,
                          const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg) {
    return generate_with_contexts(question, retrieve(question, query_id, index, gateway, cfg.embedder, cfg.k_retrieve),
                                  corpus, gateway, cfg);
}

json to_json(const QuestionResult& q) {
    return json{{"qa_id", q.qa_id},
                {"question", q.question},
                {"ground_truth", q.ground_truth},
                {"truth_chunk_id", q.truth_chunk_id},
                {"retrieval", to_json(q.retrieval)},
                {"truth_rank", q.truth_rank ? json(*q.truth_rank) : json(nullptr)},
                {"near_miss", q.near_miss},
                {"answer", q.answer},
                {"contexts", q.contexts},
                {kMetricAnswerCorrectness, optional_score(q.answer_correctness)},
                {kMetricFaithfulness, optional_score(q.faithfulness)},
                {kMetricAnswerRelevance, optional_score(q.answer_relevance)},
                {"error", q.error}};
}

QuestionResult question_result_from_json(const json& j) {
    QuestionResult q;
    q.qa_id = j.at("qa_id").get<std::string>();
    q.question = j.value("question", "");
    q.ground_truth = j.value("ground_truth", "");
    q.truth_chunk_id = j.value("truth_chunk_id", "");
    q.retrieval = retrieval_from_json(j.value("retrieval", json::object()));
    if (j.contains("truth_rank") && !j["truth_rank"].is_null()) q.truth_rank = j["truth_rank"].get<std::size_t>();
    q.near_miss = j.value("near_miss", false);
    q.answer = j.value("answer", "");
    q.contexts = j.value("contexts", std::vector<std::string>{});
    q.answer_correctness = optional_score_from(j, kMetricAnswerCorrectness);
    q.faithfulness = optional_score_from(j, kMetricFaithfulness);
    q.answer_relevance = optional_score_from(j, kMetricAnswerRelevance);
    q.error = j.value("error", "");
    return q;
}

void recompute_aggregates(EvalRunResult& run) {
    if (run.questions.empty()) throw PipelineError("evaluation run has no questions");
    run.metrics.clear();
    for (const auto& name : kRunMetrics) {
        MetricAggregate agg;
        double sum = 0.0;
        for (const auto& q : run.questions) {
            const auto& s = metric_of(q, name);
            if (s && s->parse_ok && s->value) {
                sum += *s->value;
                ++agg.scored;
            } else {
                ++agg.unscored;
            }
        }
        if (agg.scored > 0) agg.mean = sum / static_cast<double>(agg.scored);
        run.metrics[name] = agg;
    }
    std::vector<RetrievalOutcome> outcomes;
    run.near_misses = 0;
    run.failed_questions = 0;
    for (const auto& q : run.questions) {
        outcomes.push_back(RetrievalOutcome{q.qa_id, q.truth_chunk_id, q.truth_rank, run.k});
        run.near_misses += q.near_miss ? 1 : 0;
        run.failed_questions += q.error.empty() ? 0 : 1;
    }
    run.recall_at_k = recall_at_k(outcomes, run.k);
    run.mrr_at_k = mrr_at_k(outcomes, run.k);
}

json aggregates_to_json(const EvalRunResult& r) {
    json metrics = json::object();
    for (const auto& [name, agg] : r.metrics) {
        metrics[name] = {{"mean", agg.mean ? json(*agg.mean) : json(nullptr)},
                         {"scored", agg.scored},
                         {"unscored", agg.unscored}};
    }
    return json{{"label", r.label},
                {"k", r.k},
                {"n_questions", r.questions.size()},
                {"failed_questions", r.failed_questions},
                {"metrics", metrics},
                {"recall_at_k", r.recall_at_k},
                {"mrr_at_k", r.mrr_at_k},
                {"near_misses", r.near_misses}};
}

std::string questions_jsonl(const EvalRunResult& r) {
    std::vector<json> rows;
    rows.reserve(r.questions.size());
    for (const auto& q : r.questions) rows.push_back(to_json(q));
    return to_jsonl(rows);
}

EvalRunResult load_eval_run(const std::filesystem::path& path, std::string label) {
    EvalRunResult run;
    run.label = std::move(label);
    for (const auto& row : read_jsonl(path)) {
        run.questions.push_back(question_result_from_json(row));
        run.k = std::max(run.k, run.questions.back().retrieval.k);
    }
    if (run.k == 0) run.k = 1;
    recompute_aggregates(run);
    return run;
}

EvalRunResult evaluate_retrieved(const std::vector<QARecord>& dataset, const std::vector<RetrievalResult>& retrievals,
                                 std::size_t k, const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg) {
    if (dataset.empty()) throw PipelineError("evaluation dataset is empty");
    if (retrievals.size() != dataset.size()) throw InvalidArgument("evaluate_retrieved: one retrieval per QA required");
    if (k == 0) throw InvalidArgument("evaluate_retrieved: k must be >= 1");
    const JudgeClient judge{&gateway, cfg.judge};

    EvalRunResult run;
    run.k = k;
    run.questions.resize(dataset.size());
    parallel_for(dataset.size(), cfg.workers, [&](std::size_t i) {
        const QARecord& qa = dataset[i];
        QuestionResult& q = run.questions[i];
        q.qa_id = qa.qa_id;
        q.question = qa.question;
        q.ground_truth = qa.answer;
        q.truth_chunk_id = qa.chunk_id;
        q.retrieval = truncate(retrievals[i], k);
        q.truth_rank = rank_of_truth(q.retrieval, qa.chunk_id);
        q.near_miss = !q.truth_rank && overlaps_truth(corpus, corpus.find_chunk(qa.chunk_id), q.retrieval);

        RagAnswer ans = generate_with_contexts(qa.question, q.retrieval, corpus, gateway, cfg);
        q.contexts = ans.contexts;
        if (!ans.ok()) {
            q.error = ans.error;
            return;
        }
        q.answer = ans.answer;
        q.answer_correctness = score_answer_correctness(q.answer, qa.answer, cfg.correctness_program, judge);
        q.faithfulness = score_faithfulness(q.answer, q.contexts, judge);
        q.answer_relevance = score_answer_relevance(q.answer, q.question, judge, cfg.embedder, cfg.relevance_questions);
    });
    std::stable_sort(run.questions.begin(), run.questions.end(),
                     [](const QuestionResult& a, const QuestionResult& b) { return a.qa_id < b.qa_id; });
    recompute_aggregates(run);
    return run;
}

std::vector<RetrievalResult> retrieve_dataset(const std::vector<QARecord>& dataset, const VectorIndex& index,
                                          ModelGateway& gateway, const ModelEndpoint& embedder, std::size_t k) {
    std::vector<std::string> questions;
    for (const auto& qa : dataset) questions.push_back(qa.question);
    const auto vecs = gateway.embed_texts(questions, embedder);
    std::vector<RetrievalResult> out;
    out.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) out.push_back(index.query_top_k(vecs[i], k, dataset[i].qa_id));
    return out;
}

EvalRunResult evaluate_run(const std::vector<QARecord>& dataset, const VectorIndex& index, const Corpus& corpus,
                           ModelGateway& gateway, const RagConfig& cfg) {
    if (dataset.empty()) throw PipelineError("evaluation dataset is empty");
    if (cfg.k_retrieve < 1) throw ConfigError("k_retrieve must be >= 1");
    return evaluate_retrieved(dataset, retrieve_dataset(dataset, index, gateway, cfg.embedder, cfg.k_retrieve),
                              cfg.k_retrieve, corpus, gateway, cfg);
}

std::vector<EvalRunResult> ablate_chunk_count(const std::vector<QARecord>& dataset, const VectorIndex& index,
                                              const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg,
                                              const std::vector<std::size_t>& k_values) {
    if (dataset.empty()) throw PipelineError("evaluation dataset is empty");
    if (k_values.empty()) throw InvalidArgument("ablate_chunk_count: no k values");
    const std::size_t k_max = *std::max_element(k_values.begin(), k_values.end());
    if (*std::min_element(k_values.begin(), k_values.end()) == 0) throw InvalidArgument("ablate_chunk_count: k = 0");
    const auto retrievals = retrieve_dataset(dataset, index, gateway, cfg.embedder, k_max);
    std::vector<EvalRunResult> runs;
    for (std::size_t k : k_values) {
        runs.push_back(evaluate_retrieved(dataset, retrievals, k, corpus, gateway, cfg));
        runs.back().label = "k=" + std::to_string(k);
    }
    return runs;
}

std::string aggregate_csv(const std::vector<EvalRunResult>& runs) {
    std::ostringstream os;
    os << "run,k,n,answer_correctness,faithfulness,answer_relevance,recall_at_k,mrr_at_k\n";
    for (const auto& r : runs) {
        os << csv_field(r.label) << ',' << r.k << ',' << r.questions.size();
        for (const auto& m : kRunMetrics) {
            auto it = r.metrics.find(m);
            os << ',' << csv_value(it == r.metrics.end() ? std::nullopt : it->second.mean);
        }
        os << ',' << format_fixed(r.recall_at_k, 4) << ',' << format_fixed(r.mrr_at_k, 4) << '\n';
    }
    return os.str();
}

std::string ablation_csv(const std::map<std::string, std::vector<EvalRunResult>>& by_domain) {
    std::ostringstream os;
    os << "metric,domain";
    if (!by_domain.empty()) {
        for (const auto& r : by_domain.begin()->second) os << ",k=" << r.k;
    }
    os << '\n';
    for (const auto& m : kRunMetrics) {
        for (const auto& [domain, runs] : by_domain) {
            os << m << ',' << csv_field(domain);
            for (const auto& r : runs) {
                auto it = r.metrics.find(m);
                os << ',' << csv_value(it == r.metrics.end() ? std::nullopt : it->second.mean);
            }
            os << '\n';
        }
    }
    return os.str();
}

const std::vector<std::string>& failure_categories() {
    static const std::vector<std::string> kCategories = {
        "Over-Specificity",      "Not Extracted",         "Under-Specificity",     "Missed Top Ranked",
        "Wrong Format",          "Context Inconsistency", "Factual Fabrication",   "Factual Contradiction",
        "Logical Inconsistency", "Instruction Inconsistency"};
    return kCategories;
}

std::optional<std::vector<std::string>> parse_failure_labels(std::string_view raw) {
    std::optional<std::string> body;
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        while (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '#')) t = trim(t.substr(1));
        const std::string lower = to_lower(t);
        const std::string key = "failure_labels";
        if (lower.compare(0, key.size(), key) != 0) continue;
        std::size_t p = key.size();
        while (p < t.size() && (t[p] == '*' || t[p] == '"' || t[p] == '\'')) ++p;
        if (p < t.size() && t[p] == ':') body = t.substr(p + 1);
    }
    if (!body) return std::nullopt;

    std::vector<std::string> normalized;
    for (const auto& c : failure_categories()) normalized.push_back(normalize_label(c));
    std::set<std::size_t> found;
    std::string item;
    std::vector<std::string> items;
    for (char c : *body) {
        if (c == ',' || c == ';' || c == '|') {
            items.push_back(item);
            item.clear();
        } else {
            item += c;
        }
    }
    items.push_back(item);
    for (const auto& it : items) {
        const std::string n = normalize_label(it);
        if (n.empty() || n == "none") continue;
        auto pos = std::find(normalized.begin(), normalized.end(), n);
        if (pos == normalized.end()) return std::nullopt;
        found.insert(static_cast<std::size_t>(pos - normalized.begin()));
    }
    std::vector<std::string> out;
    for (std::size_t i : found) out.push_back(failure_categories()[i]);
    return out;
}

FailureAnalysis analyze_failures(const EvalRunResult& run, double threshold, const JudgeClient& judge,
                                 std::size_t workers) {
    if (judge.gateway == nullptr) throw InvalidArgument("analyze_failures: judge client has no gateway");
    FailureAnalysis a;
    a.threshold = threshold;
    std::vector<const QuestionResult*> low;
    for (const auto& q : run.questions) {
        if (!q.answer_correctness || !q.answer_correctness->parse_ok) continue;
        ++a.n_scored;
        if (*q.answer_correctness->value < threshold) {
            low.push_back(&q);
        } else {
            ++a.n_no_failures;
        }
    }

    const std::string tpl(builtin_asset("templates/failure_taxonomy.txt"));
    a.labels.resize(low.size());
    parallel_for(low.size(), workers, [&](std::size_t i) {
        const QuestionResult& q = *low[i];
        FailureLabel& fl = a.labels[i];
        fl.qa_id = q.qa_id;
        fl.score = *q.answer_correctness->value;
        ChatRequest req = make_judge_request(judge.endpoint.model_name,
                                             render_template(tpl, {{"question", q.question},
                                                                   {"ground_truth", q.ground_truth},
                                                                   {"answer", q.answer},
                                                                   {"score", format_fixed(fl.score, 3)},
                                                                   {"contexts", numbered_contexts(q.contexts)}}));
        try {
            std::string reply = judge.gateway->chat_complete(judge.endpoint, req).text;
            fl.raw_transcript = reply;
            auto parsed = parse_failure_labels(reply);
            if (!parsed) {
                req.messages.push_back({"assistant", reply});
                req.messages.push_back({"user", render_template(builtin_asset("templates/parse_retry.txt"),
                                                                {{"field", "failure_labels"}})});
                reply = judge.gateway->chat_complete(judge.endpoint, req).text;
                fl.raw_transcript += "\n-----\n" + reply;
                parsed = parse_failure_labels(reply);
            }
            if (parsed) {
                fl.labels = *parsed;
                const auto r = parse_prefixed_lines(reply, "rationale");
                if (!r.empty()) fl.rationale = r.back();
            } else {
                fl.judge_failure = true;
            }
        } catch (const TransportError& e) {
            fl.judge_failure = true;
            fl.raw_transcript = e.what();
        } catch (const ProtocolError& e) {
            fl.judge_failure = true;
            fl.raw_transcript = e.what();
        }
    });

    for (const auto& c : failure_categories()) a.counts[c] = 0;
    a.quartiles = {{0.0, 0.25, 0, {}}, {0.25, 0.5, 0, {}}, {0.5, 0.75, 0, {}}, {0.75, 1.0, 0, {}}};
    for (const auto& fl : a.labels) {
        if (fl.judge_failure) {
            ++a.n_judge_failures;
            continue;
        }
        if (fl.labels.empty()) ++a.n_no_failures;
        for (const auto& l : fl.labels) ++a.counts[l];
        if (fl.score < 1.0) {
            auto& b = a.quartiles[std::min<std::size_t>(3, static_cast<std::size_t>(std::max(0.0, fl.score) * 4.0))];
            ++b.n;
            for (const auto& l : fl.labels) ++b.counts[l];
        }
    }
    const std::size_t denom = a.n_scored - a.n_judge_failures;
    auto pct = [&](std::size_t n) { return denom == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(denom); };
    for (const auto& [c, n] : a.counts) a.percentages[c] = pct(n);
    a.percentages["No Failures"] = pct(a.n_no_failures);
    return a;
}

json to_json(const FailureAnalysis& a) {
    json labels = json::array();
    for (const auto& fl : a.labels) {
        labels.push_back({{"qa_id", fl.qa_id},
                          {"score", fl.score},
                          {"labels", fl.labels},
                          {"rationale", fl.rationale},
                          {"judge_failure", fl.judge_failure},
                          {"raw_transcript", fl.raw_transcript}});
    }
    json quartiles = json::array();
    for (const auto& b : a.quartiles) quartiles.push_back({{"lo", b.lo}, {"hi", b.hi}, {"n", b.n}, {"counts", b.counts}});
    return json{{"threshold", a.threshold},
                {"n_scored", a.n_scored},
                {"n_judge_failures", a.n_judge_failures},
                {"n_no_failures", a.n_no_failures},
                {"counts", a.counts},
                {"percentages", a.percentages},
                {"quartiles", quartiles},
                {"labels", labels}};
}

std::string failure_counts_csv(const FailureAnalysis& a) {
    std::ostringstream os;
    os << "category,side,count,percent\n";
    const auto& cats = failure_categories();
    for (std::size_t i = 0; i < cats.size(); ++i) {
        os << cats[i] << ',' << (i < 5 ? "retrieval" : "generation") << ',' << a.counts.at(cats[i]) << ','
           << format_fixed(a.percentages.at(cats[i]), 1) << '\n';
    }
    os << "No Failures,," << a.n_no_failures << ',' << format_fixed(a.percentages.at("No Failures"), 1) << '\n';
    return os.str();
}

std::string failure_quartiles_csv(const FailureAnalysis& a) {
    std::ostringstream os;
    os << "bucket,n";
    for (const auto& c : failure_categories()) os << ',' << c;
    os << '\n';
    for (const auto& b : a.quartiles) {
        os << '[' << format_fixed(b.lo, 2) << ' ' << format_fixed(b.hi, 2) << ")," << b.n;
        for (const auto& c : failure_categories()) {
            auto it = b.counts.find(c);
            os << ',' << (it == b.counts.end() ? 0 : it->second);
        }
        os << '\n';
    }
    return os.str();
}

SelfBiasMatrix self_bias_from_runs(const std::vector<std::string>& origins, const std::vector<std::string>& models,
                                   const std::map<std::string, std::map<std::string, EvalRunResult>>& runs) {
    if (origins.empty() || models.empty()) throw InvalidArgument("self_bias: need at least one dataset and one model");
    SelfBiasMatrix m;
    m.origins = origins;
    m.models = models;
    for (const auto& model : models) {
        for (const auto& metric : kRunMetrics) {
            const std::size_t first = m.cells.size();
            for (const auto& origin : origins) {
                SelfBiasCell cell{model, metric, origin, std::nullopt, false};
                const auto& run = runs.at(origin).at(model);
                auto it = run.metrics.find(metric);
                if (it != run.metrics.end()) cell.score = it->second.mean;
                m.cells.push_back(cell);
            }
            std::optional<double> best;
            std::size_t best_at = 0, ties = 0;
            for (std::size_t i = first; i < m.cells.size(); ++i) {
                const auto& s = m.cells[i].score;
                if (!s) continue;
                if (!best || *s > *best) {
                    best = s;
                    best_at = i;
                    ties = 1;
                } else if (*s == *best) {
                    ++ties;
                }
            }
            if (best && ties == 1) {
                m.cells[best_at].best = true;
                if (m.cells[best_at].dataset_origin == model) m.self_preferred.push_back(model + "/" + metric);
            }
        }
    }
    return m;
}

SelfBiasMatrix self_bias_matrix(const std::map<std::string, std::vector<QARecord>>& datasets,
                                const std::vector<ModelEndpoint>& models, const VectorIndex& index,
                                const Corpus& corpus, ModelGateway& gateway, const RagConfig& cfg) {
    std::vector<std::string> origins;
    std::vector<std::string> names;
    std::map<std::string, std::map<std::string, EvalRunResult>> runs;
    for (const auto& model : models) names.push_back(model.model_name);
    for (const auto& [origin, data] : datasets) {
        origins.push_back(origin);
        for (const auto& model : models) {
            RagConfig c = cfg;
            c.generator = model;
            EvalRunResult r = evaluate_run(data, index, corpus, gateway, c);
            r.label = origin + "/" + model.model_name;
            runs[origin][model.model_name] = std::move(r);
        }
    }
    return self_bias_from_runs(origins, names, runs);
}

json to_json(const SelfBiasMatrix& m) {
    json cells = json::array();
    for (const auto& c : m.cells) {
        cells.push_back({{"evaluated_model", c.evaluated_model},
                         {"metric", c.metric},
                         {"dataset_origin", c.dataset_origin},
                         {"score", c.score ? json(*c.score) : json(nullptr)},
                         {"best", c.best}});
    }
    return json{{"origins", m.origins}, {"models", m.models}, {"cells", cells}, {"self_preferred", m.self_preferred}};
}

std::string self_bias_csv(const SelfBiasMatrix& m) {
    std::ostringstream os;
    os << "evaluated_model,metric,dataset_origin,score,best\n";
    for (const auto& c : m.cells) {
        os << csv_field(c.evaluated_model) << ',' << c.metric << ',' << csv_field(c.dataset_origin) << ','
           << csv_value(c.score) << ',' << (c.best ? "*" : "") << '\n';
    }
    return os.str();
}

}  // namespace ragcal
