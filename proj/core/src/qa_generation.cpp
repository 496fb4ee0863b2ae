#include "ragcal/qa_generation.hpp"

#include <chrono>
#include <cstdio>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

std::int64_t request_seed(std::uint64_t seed, const std::string& purpose) {
    return static_cast<std::int64_t>(derive_seed(seed, purpose) & 0x7fffffffULL);
}

std::string generate_text(ModelGateway& gateway, const QAGenerationConfig& cfg, const std::string& prompt,
                          std::uint64_t seed, const std::string& purpose) {
    ChatRequest req;
    req.model_name = cfg.generator.model_name;
    req.messages = {{"user", prompt}};
    req.temperature = cfg.generation_temperature;
    req.seed = request_seed(seed, purpose);
    return trim(gateway.chat_complete(cfg.generator, req).text);
}

// Empty output gets one more try under a different seed.
std::optional<std::string> generate_nonempty(ModelGateway& gateway, const QAGenerationConfig& cfg,
                                             const std::string& prompt, std::uint64_t seed, const std::string& tag) {
    for (int i = 0; i < 2; ++i) {
        std::string text = generate_text(gateway, cfg, prompt, seed, tag + "/" + std::to_string(i));
        if (!text.empty()) return text;
    }
    return std::nullopt;
}

}  // namespace

void FilterThresholds::validate() const {
    if (answerability_min != 0.0 && answerability_min != 1.0) {
        throw ConfigError("answerability_min must be 0 or 1");
    }
    if (!(faithfulness_min >= 0.0 && faithfulness_min <= 1.0)) throw ConfigError("faithfulness_min must be in [0,1]");
    if (!(relevance_min >= 0.0 && relevance_min <= 1.0)) throw ConfigError("relevance_min must be in [0,1]");
}

std::size_t GenerationStats::total_rejected() const {
    std::size_t n = 0;
    for (const auto& [_, c] : rejected_by_metric) n += c;
    return n;
}

json to_json(const QARecord& r) {
    return json{{"qa_id", r.qa_id},
                {"question", r.question},
                {"answer", r.answer},
                {"chunk_id", r.chunk_id},
                {"filter_scores",
                 {{"answerability", r.filter_scores.answerability},
                  {"faithfulness", r.filter_scores.faithfulness},
                  {"answer_relevance", r.filter_scores.answer_relevance}}},
                {"generator_model", r.generator_model},
                {"attempt_index", r.attempt_index}};
}

QARecord qa_record_from_json(const json& j) {
    QARecord r;
    r.qa_id = j.at("qa_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.chunk_id = j.at("chunk_id").get<std::string>();
    if (j.contains("filter_scores")) {
        const auto& f = j.at("filter_scores");
        r.filter_scores.answerability = f.value("answerability", 0.0);
        r.filter_scores.faithfulness = f.value("faithfulness", 0.0);
        r.filter_scores.answer_relevance = f.value("answer_relevance", 0.0);
    }
    r.generator_model = j.value("generator_model", "");
    r.attempt_index = j.value("attempt_index", std::size_t{0});
    return r;
}

std::vector<QARecord> load_qa_dataset(const std::filesystem::path& path) {
    std::vector<QARecord> out;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(qa_record_from_json(row));
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": record " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

json to_json(const GenerationStats& s) {
    return json{{"requested", s.requested},
                {"attempts", s.attempts},
                {"accepted", s.accepted},
                {"rejected_by_metric", s.rejected_by_metric},
                {"wall_seconds", s.wall_seconds},
                {"samples_per_minute", s.samples_per_minute},
                {"budget_exhausted", s.budget_exhausted}};
}

std::vector<Chunk> sample_contexts(const Corpus& corpus, long long n, std::uint64_t seed) {
    if (n <= 0) throw InvalidArgument("sample_contexts: n must be >= 1");
    const auto& chunks = corpus.chunks();
    if (chunks.empty()) throw InvalidArgument("sample_contexts: corpus has no chunks");
    Rng rng(seed);
    const auto count = static_cast<std::size_t>(n);
    const std::size_t distinct = std::min(count, chunks.size());
    std::vector<Chunk> out;
    out.reserve(count);
    for (std::size_t i : sample_without_replacement(chunks.size(), distinct, rng)) out.push_back(chunks[i]);
    while (out.size() < count) out.push_back(chunks[rng.uniform_index(chunks.size())]);
    return out;
}

std::optional<std::string> generate_question(const Chunk& chunk, ModelGateway& gateway,
                                             const QAGenerationConfig& cfg, std::uint64_t seed) {
    if (trim(chunk.text).empty()) throw InvalidArgument("generate_question: empty chunk " + chunk.chunk_id);
    const std::string prompt = render_template(builtin_asset("templates/qa_question_user.txt"), {{"context", chunk.text}});
    auto question = generate_nonempty(gateway, cfg, prompt, seed, "question");
    if (!question) return std::nullopt;

    const std::string check = render_template(builtin_asset("templates/qa_question_check.txt"),
                                              {{"context", chunk.text}, {"question", *question}});
    const ChatResponse verdict =
        gateway.chat_complete(cfg.judge, make_judge_request(cfg.judge.model_name, check));
    const ParsedValue flag = parse_judge_output(verdict.text, "specific_flag", Scale::binary);
    if (flag.ok() && *flag.value == 1.0) return question;
    return generate_nonempty(gateway, cfg, prompt, seed, "question-regen");
}

std::optional<std::string> generate_answer(const std::string& question, const Chunk& chunk, ModelGateway& gateway,
                                           const QAGenerationConfig& cfg, std::uint64_t seed) {
    if (trim(question).empty() || trim(chunk.text).empty()) {
        throw InvalidArgument("generate_answer: empty question or context");
    }
    const std::string prompt = render_template(builtin_asset("templates/qa_answer_sme.txt"),
                                               {{"context", chunk.text}, {"question", question}});
    return generate_nonempty(gateway, cfg, prompt, seed, "answer");
}

ValidationOutcome validate_candidate(const std::string& question, const std::string& answer, const Chunk& chunk,
                                     ModelGateway& gateway, const QAGenerationConfig& cfg) {
    const JudgeClient judge{&gateway, cfg.judge};
    ValidationOutcome out;
    auto gate = [&](MetricScore score, double min, const char* reason, double& slot) {
        out.metric_scores.push_back(score);
        if (!score.parse_ok) {
            out.reason = kRejectJudgeFailure;
            return false;
        }
        slot = *score.value;
        if (slot < min) {
            out.reason = reason;
            return false;
        }
        return true;
    };
    if (!gate(score_answerability(question, chunk.text, cfg.answerability_program, judge),
              cfg.thresholds.answerability_min, kRejectAnswerability, out.scores.answerability)) {
        return out;
    }
    if (!gate(score_faithfulness(answer, {chunk.text}, judge), cfg.thresholds.faithfulness_min, kRejectFaithfulness,
              out.scores.faithfulness)) {
        return out;
    }
    if (!gate(score_answer_relevance(answer, question, judge, cfg.embedder, cfg.relevance_questions),
              cfg.thresholds.relevance_min, kRejectRelevance, out.scores.answer_relevance)) {
        return out;
    }
    out.accepted = true;
    return out;
}

GenerationResult generate_dataset(const Corpus& corpus, std::size_t n_target, ModelGateway& gateway,
                                  const QAGenerationConfig& cfg, std::uint64_t seed) {
    if (n_target == 0) throw InvalidArgument("generate_dataset: n_target must be >= 1");
    cfg.thresholds.validate();
    const std::size_t budget = n_target * std::max<std::size_t>(1, cfg.budget_multiplier);
    const auto contexts = sample_contexts(corpus, static_cast<long long>(budget), derive_seed(seed, "qa/sample"));

    struct Attempt {
        bool accepted = false;
        std::string reason;
        QARecord record;
    };
    auto run_attempt = [&](std::size_t index) {
        Attempt a;
        const Chunk& chunk = contexts[index];
        const std::uint64_t s = derive_seed(seed, "qa/attempt/" + std::to_string(index));
        try {
            const auto question = generate_question(chunk, gateway, cfg, s);
            const auto answer = question ? generate_answer(*question, chunk, gateway, cfg, s) : std::nullopt;
            if (!answer) {
                a.reason = kRejectGeneration;
                return a;
            }
            const ValidationOutcome v = validate_candidate(*question, *answer, chunk, gateway, cfg);
            a.accepted = v.accepted;
            a.reason = v.reason;
            a.record = QARecord{"", *question, *answer, chunk.chunk_id, v.scores, cfg.generator.model_name, index};
        } catch (const TransportError&) {
            a.reason = kRejectGeneration;
        } catch (const ProtocolError&) {
            a.reason = kRejectGeneration;
        }
        return a;
    };

    GenerationResult result;
    GenerationStats& stats = result.stats;
    stats.requested = n_target;
    for (const char* r : {kRejectAnswerability, kRejectFaithfulness, kRejectRelevance, kRejectJudgeFailure,
                          kRejectGeneration}) {
        stats.rejected_by_metric[r] = 0;
    }
    const auto started = std::chrono::steady_clock::now();
    const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
    std::size_t next = 0;
    while (next < budget && stats.accepted < n_target) {
        const std::size_t wave = std::min(workers, budget - next);
        std::vector<Attempt> attempts(wave);
        parallel_for(wave, workers, [&](std::size_t i) { attempts[i] = run_attempt(next + i); });
        for (auto& a : attempts) {
            if (stats.accepted == n_target) break;
            ++stats.attempts;
            if (a.accepted) {
                ++stats.accepted;
                char id[32];
                std::snprintf(id, sizeof id, "qa-%05zu", stats.accepted);
                a.record.qa_id = id;
                result.records.push_back(std::move(a.record));
            } else {
                ++stats.rejected_by_metric[a.reason];
            }
        }
        next += wave;
    }
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    stats.samples_per_minute = stats.wall_seconds > 0.0 ? stats.accepted * 60.0 / stats.wall_seconds : 0.0;
    if (stats.accepted < n_target) {
        stats.budget_exhausted = true;
        result.warnings.push_back("attempt budget of " + std::to_string(budget) + " exhausted with " +
                                  std::to_string(stats.accepted) + " of " + std::to_string(n_target) +
                                  " records accepted");
    }
    return result;
}

}  // namespace ragcal
