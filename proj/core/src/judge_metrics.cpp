#include "ragcal/judge_metrics.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "ragcal/errors.hpp"
#include "ragcal/vector_index.hpp"

namespace ragcal {
namespace {

constexpr std::string_view kTurnSeparator = "\n-----\n";

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Position just past the colon of the last "<field>:" occurrence, or npos.
std::size_t find_last_field(std::string_view raw, std::string_view field) {
    const std::string hay = to_lower(raw);
    const std::string needle = to_lower(field);
    if (needle.empty()) return std::string::npos;
    std::size_t pos = hay.rfind(needle);
    while (pos != std::string::npos) {
        const bool left_ok = pos == 0 || !ident_char(hay[pos - 1]);
        std::size_t p = pos + needle.size();
        while (p < hay.size() && (hay[p] == '*' || hay[p] == '"' || hay[p] == '\'' || hay[p] == '`')) ++p;
        if (left_ok && p < hay.size() && hay[p] == ':') return p + 1;
        if (pos == 0) break;
        pos = hay.rfind(needle, pos - 1);
    }
    return std::string::npos;
}

// Sends `prompt`; when `accept` rejects the reply, re-asks once in the same
// conversation, naming `field` (read after `accept` ran, so it may be set by it).
std::string ask_with_retry(const JudgeClient& judge, const std::string& prompt, const std::string& field,
                           const std::function<bool(const std::string&)>& accept, std::string& transcript,
                           bool& accepted) {
    if (judge.gateway == nullptr) throw InvalidArgument("judge client has no gateway");
    ChatRequest req = make_judge_request(judge.endpoint.model_name, prompt);
    const ChatResponse first = judge.gateway->chat_complete(judge.endpoint, req);
    transcript = first.text;
    if (accept(first.text)) {
        accepted = true;
        return first.text;
    }
    req.messages.push_back({"assistant", first.text});
    req.messages.push_back(
        {"user", render_template(builtin_asset("templates/parse_retry.txt"), {{"field", field}})});
    const ChatResponse second = judge.gateway->chat_complete(judge.endpoint, req);
    transcript += kTurnSeparator;
    transcript += second.text;
    accepted = accept(second.text);
    return second.text;
}

MetricScore unscored(std::string metric, const JudgeClient& judge, std::string error) {
    MetricScore s;
    s.metric_name = std::move(metric);
    s.judge_model = judge.endpoint.model_name;
    s.error = std::move(error);
    return s;
}

void require_text(std::string_view s, const char* what) {
    if (trim(s).empty()) throw InvalidArgument(std::string(what) + " must be non-empty");
}

}  // namespace

ParsedValue parse_judge_output(std::string_view raw, std::string_view output_field, Scale scale) {
    ParsedValue out;
    const std::size_t start = find_last_field(raw, output_field);
    if (start == std::string::npos) {
        out.error = "field '" + std::string(output_field) + "' not found";
        return out;
    }
    std::size_t p = start;
    while (p < raw.size() &&
           (std::isspace(static_cast<unsigned char>(raw[p])) != 0 || raw[p] == '*' || raw[p] == '[' ||
            raw[p] == '"' || raw[p] == '\'' || raw[p] == '`')) {
        ++p;
    }
    const std::string tail(raw.substr(p, 64));
    char* end = nullptr;
    const double v = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str() || !std::isfinite(v)) {
        out.error = "non-numeric value for '" + std::string(output_field) + "'";
        return out;
    }
    if (scale == Scale::binary) {
        if (v != 0.0 && v != 1.0) {
            out.error = "binary field '" + std::string(output_field) + "' is neither 0 nor 1";
            return out;
        }
        out.value = v;
        return out;
    }
    if (v < 0.0 || v > 1.0) {
        out.clamped = true;
        out.value = std::clamp(v, 0.0, 1.0);
    } else {
        out.value = v;
    }
    return out;
}

std::vector<std::string> parse_prefixed_lines(std::string_view raw, std::string_view prefix) {
    std::vector<std::string> out;
    const std::string want = to_lower(prefix) + ":";
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        while (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '#')) t = trim(t.substr(1));
        if (to_lower(t.substr(0, want.size())) != want) continue;
        std::string body = trim(t.substr(want.size()));
        if (!body.empty()) out.push_back(std::move(body));
    }
    return out;
}

json to_json(const MetricScore& s) {
    json j{{"metric_name", s.metric_name},       {"value", nullptr},        {"judge_model", s.judge_model},
           {"raw_transcript", s.raw_transcript}, {"parse_ok", s.parse_ok}, {"clamped", s.clamped}};
    if (s.value) j["value"] = *s.value;
    if (!s.error.empty()) j["error"] = s.error;
    if (!s.details.empty()) j["details"] = s.details;
    return j;
}

MetricScore metric_score_from_json(const json& j) {
    MetricScore s;
    s.metric_name = j.at("metric_name").get<std::string>();
    if (!j.at("value").is_null()) s.value = j.at("value").get<double>();
    s.judge_model = j.value("judge_model", "");
    s.raw_transcript = j.value("raw_transcript", "");
    s.parse_ok = j.value("parse_ok", false);
    s.clamped = j.value("clamped", false);
    s.error = j.value("error", "");
    s.details = j.value("details", json::object());
    return s;
}

MetricScore score_with_program(const PromptProgram& program, const std::map<std::string, std::string>& inputs,
                               const JudgeClient& judge) {
    MetricScore s = unscored(program.metric_name, judge, "");
    try {
        ParsedValue parsed;
        auto accept = [&](const std::string& text) {
            parsed = parse_judge_output(text, program.output_field, program.scale);
            return parsed.ok();
        };
        bool ok = false;
        ask_with_retry(judge, program.render(inputs), program.output_field, accept, s.raw_transcript, ok);
        if (ok) {
            s.value = parsed.value;
            s.parse_ok = true;
            s.clamped = parsed.clamped;
        } else {
            s.error = "parse failure: " + parsed.error;
        }
    } catch (const TransportError& e) {
        s.error = e.what();
    } catch (const ProtocolError& e) {
        s.error = e.what();
    }
    return s;
}

MetricScore score_answer_correctness(std::string_view generated, std::string_view reference,
                                     const PromptProgram& program, const JudgeClient& judge) {
    require_text(generated, "answer_correctness: generated answer");
    require_text(reference, "answer_correctness: reference");
    return score_with_program(program, {{"response", std::string(generated)}, {"reference", std::string(reference)}},
                              judge);
}

MetricScore score_answerability(std::string_view question, std::string_view context, const PromptProgram& program,
                                const JudgeClient& judge) {
    require_text(question, "answerability: question");
    require_text(context, "answerability: context");
    return score_with_program(program, {{"question", std::string(question)}, {"context", std::string(context)}},
                              judge);
}

MetricScore score_faithfulness(std::string_view answer, const std::vector<std::string>& contexts,
                               const JudgeClient& judge) {
    require_text(answer, "faithfulness: answer");
    MetricScore s = unscored("faithfulness", judge, "");
    try {
        std::vector<std::string> statements;
        auto accept_statements = [&](const std::string& text) {
            statements = parse_prefixed_lines(text, "statement");
            return !statements.empty();
        };
        bool ok = false;
        std::string transcript;
        ask_with_retry(judge,
                       render_template(builtin_asset("templates/faithfulness_statements.txt"),
                                       {{"answer", std::string(answer)}}),
                       std::string("statement"), accept_statements, transcript, ok);
        s.raw_transcript = transcript;
        if (!ok) {
            s.error = "no statements extracted";
            return s;
        }

        std::string ctx;
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            if (i > 0) ctx += "\n\n";
            ctx += "[" + std::to_string(i + 1) + "] " + contexts[i];
        }
        std::string listed;
        for (std::size_t i = 0; i < statements.size(); ++i) {
            listed += std::to_string(i + 1) + ". " + statements[i] + "\n";
        }
        std::vector<int> verdicts;
        std::string missing;
        auto accept_verdicts = [&](const std::string& text) {
            verdicts.assign(statements.size(), -1);
            missing.clear();
            for (std::size_t i = 0; i < statements.size(); ++i) {
                const std::string field = "verdict_" + std::to_string(i + 1);
                const ParsedValue v = parse_judge_output(text, field, Scale::binary);
                if (v.ok()) {
                    verdicts[i] = static_cast<int>(*v.value);
                } else if (missing.empty()) {
                    missing = field;
                }
            }
            return missing.empty();
        };
        const std::string prompt =
            render_template(builtin_asset("templates/faithfulness_verdicts.txt"), {{"contexts", ctx}, {"statements", listed}});
        std::string vtranscript;
        ask_with_retry(judge, prompt, missing, accept_verdicts, vtranscript, ok);
        s.raw_transcript += std::string(kTurnSeparator) + vtranscript;
        s.details["statements"] = statements;
        if (!ok) {
            s.error = "parse failure: missing " + missing;
            return s;
        }
        std::size_t supported = 0;
        for (int v : verdicts) supported += v == 1 ? 1 : 0;
        s.details["verdicts"] = verdicts;
        s.details["supported"] = supported;
        s.details["total"] = statements.size();
        s.value = static_cast<double>(supported) / static_cast<double>(statements.size());
        s.parse_ok = true;
    } catch (const TransportError& e) {
        s.error = e.what();
    } catch (const ProtocolError& e) {
        s.error = e.what();
    }
    return s;
}

MetricScore score_answer_relevance(std::string_view answer, std::string_view question, const JudgeClient& judge,
                                   const ModelEndpoint& embedder, std::size_t n) {
    require_text(answer, "answer_relevance: answer");
    require_text(question, "answer_relevance: question");
    if (n == 0) throw InvalidArgument("answer_relevance: n must be >= 1");
    MetricScore s = unscored("answer_relevance", judge, "");
    try {
        std::vector<std::string> generated;
        auto accept = [&](const std::string& text) {
            generated = parse_prefixed_lines(text, "question");
            return !generated.empty();
        };
        bool ok = false;
        ask_with_retry(judge,
                       render_template(builtin_asset("templates/answer_relevance_questions.txt"),
                                       {{"n", std::to_string(n)}, {"answer", std::string(answer)}}),
                       std::string("question"), accept, s.raw_transcript, ok);
        if (!ok) {
            s.error = "no questions generated";
            return s;
        }
        if (generated.size() > n) generated.resize(n);

        std::vector<std::string> texts{std::string(question)};
        texts.insert(texts.end(), generated.begin(), generated.end());
        const auto vecs = judge.gateway->embed_texts(texts, embedder);
        std::vector<double> cosines;
        double sum = 0.0;
        for (std::size_t i = 1; i < vecs.size(); ++i) {
            const double c = cosine_similarity(vecs[0], vecs[i]);
            cosines.push_back(c);
            sum += c;
        }
        const double mean = sum / static_cast<double>(cosines.size());
        s.details["generated_questions"] = generated;
        s.details["cosines"] = cosines;
        s.clamped = mean < 0.0 || mean > 1.0;
        s.value = std::clamp(mean, 0.0, 1.0);
        s.parse_ok = true;
    } catch (const TransportError& e) {
        s.error = e.what();
    } catch (const ProtocolError& e) {
        s.error = e.what();
    } catch (const InvalidArgument& e) {
        s.error = e.what();
    }
    return s;
}

}  // namespace ragcal
