#include "ragcal/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

std::vector<std::string> split_row(const std::string& line, char delim, bool quoted) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted && c == '"') {
            if (in_quotes && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else {
                in_quotes = !in_quotes;
            }
        } else if (c == delim && !in_quotes) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::vector<LabeledExample> take_sample(std::vector<LabeledExample> all, std::size_t n, std::uint64_t seed,
                                        const std::string& what) {
    if (n == 0) return all;
    if (n > all.size()) {
        throw InvalidArgument(what + ": asked for " + std::to_string(n) + " examples but only " +
                              std::to_string(all.size()) + " are usable");
    }
    Rng rng(seed);
    std::vector<LabeledExample> out;
    out.reserve(n);
    for (std::size_t i : sample_without_replacement(all.size(), n, rng)) out.push_back(std::move(all[i]));
    return out;
}

}  // namespace

json to_json(const LabeledExample& e) { return json{{"inputs", e.inputs}, {"gold", e.gold}}; }

LabeledExample labeled_example_from_json(const json& j) {
    return LabeledExample{j.at("inputs").get<std::map<std::string, std::string>>(), j.at("gold").get<double>()};
}

BenchmarkSample load_stsb(const std::filesystem::path& path, std::size_t n, std::uint64_t seed) {
    const std::string ext = to_lower(path.extension().string());
    const char delim = ext == ".csv" ? ',' : '\t';
    const bool quoted = delim == ',';
    const auto lines = split_lines(read_file(path));
    if (lines.empty()) throw ConfigError(path.string() + ": empty STS-B file");

    const auto header = split_row(lines[0], delim, quoted);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (to_lower(trim(header[i])) == name) return i;
        }
        throw ConfigError(path.string() + ": STS-B header lacks column '" + name + "'");
    };
    const std::size_t c1 = column("sentence1");
    const std::size_t c2 = column("sentence2");
    const std::size_t cs = column("score");

    BenchmarkSample out;
    std::vector<LabeledExample> all;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        ++out.rows_read;
        const auto row = split_row(lines[li], delim, quoted);
        if (row.size() <= std::max({c1, c2, cs})) {
            ++out.rows_skipped;
            continue;
        }
        const std::string s1 = trim(row[c1]);
        const std::string s2 = trim(row[c2]);
        const std::string raw = trim(row[cs]);
        char* end = nullptr;
        const double score = std::strtod(raw.c_str(), &end);
        if (s1.empty() || s2.empty() || raw.empty() || end != raw.c_str() + raw.size() || !(score >= 0.0 && score <= 5.0)) {
            ++out.rows_skipped;
            continue;
        }
        all.push_back(LabeledExample{{{"reference", s1}, {"response", s2}}, score / 5.0});
    }
    out.examples = take_sample(std::move(all), n, seed, "load_stsb");
    return out;
}

BenchmarkSample load_squad2(const std::filesystem::path& path, std::size_t n, std::uint64_t seed) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.contains("data") || !doc["data"].is_array()) throw ConfigError(path.string() + ": no SQuAD 'data' array");

    BenchmarkSample out;
    std::vector<LabeledExample> all;
    for (const auto& article : doc["data"]) {
        for (const auto& para : article.value("paragraphs", json::array())) {
            const std::string context = para.contains("context") && para["context"].is_string()
                                            ? trim(para["context"].get<std::string>())
                                            : std::string();
            for (const auto& qa : para.value("qas", json::array())) {
                ++out.rows_read;
                const std::string question =
                    qa.contains("question") && qa["question"].is_string() ? trim(qa["question"].get<std::string>()) : "";
                if (context.empty() || question.empty()) {
                    ++out.rows_skipped;
                    continue;
                }
                const bool impossible = qa.value("is_impossible", false);
                all.push_back(LabeledExample{{{"question", question}, {"context", context}}, impossible ? 0.0 : 1.0});
            }
        }
    }
    out.examples = take_sample(std::move(all), n, seed, "load_squad2");
    return out;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw InvalidArgument("spearman_rho: length mismatch");
    if (xs.size() < 2) throw InvalidArgument("spearman_rho: need at least 2 pairs");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw InvalidArgument("spearman_rho: non-finite value");
    }
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(rx.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw StatisticsError("zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double bonett_wright_se(double rho_s, std::size_t n) {
    if (n < 4) throw InvalidArgument("bonett_wright_se: n must be >= 4");
    if (!(std::abs(rho_s) <= 1.0)) throw InvalidArgument("bonett_wright_se: |rho| must be <= 1");
    return std::sqrt((1.0 + rho_s * rho_s / 2.0) / static_cast<double>(n - 3));
}

json to_json(const AlignmentReport& r) {
    json scores = json::array();
    for (const auto& s : r.scores) scores.push_back(s ? json(*s) : json(nullptr));
    json j{{"metric_name", r.metric_name},
           {"judge_model", r.judge_model},
           {"program_digest", r.program_digest},
           {"n", r.n},
           {"n_total", r.n_total},
           {"parse_failures", r.parse_failures},
           {"rho_s", r.rho_s ? json(*r.rho_s) : json(nullptr)},
           {"se", r.se ? json(*r.se) : json(nullptr)},
           {"valid", r.valid},
           {"scores", scores}};
    if (!r.invalid_reason.empty()) j["invalid_reason"] = r.invalid_reason;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

std::string markdown_header() { return "| Method | Model | ρs |\n|---|---|---|\n"; }

std::string markdown_row(const AlignmentReport& r, const std::string& method) {
    std::ostringstream os;
    os << "| " << method << " | " << r.judge_model << " | ";
    if (r.rho_s) {
        os << format_fixed(*r.rho_s, 3);
        if (r.se) os << " (SE " << format_fixed(*r.se, 3) << ")";
    } else {
        os << "n/a";
    }
    if (!r.valid) os << " [invalid: " << r.invalid_reason << "]";
    os << " |\n";
    return os.str();
}

AlignmentReport validate_metric_alignment(const PromptProgram& program, const std::vector<LabeledExample>& examples,
                                          const JudgeClient& judge, std::size_t workers) {
    if (examples.empty()) throw InvalidArgument("validate_metric_alignment: no examples");
    AlignmentReport rep;
    rep.metric_name = program.metric_name;
    rep.judge_model = judge.endpoint.model_name;
    rep.program_digest = program.digest();
    rep.n_total = examples.size();

    std::vector<MetricScore> scored(examples.size());
    parallel_for(examples.size(), workers,
                 [&](std::size_t i) { scored[i] = score_with_program(program, examples[i].inputs, judge); });

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        rep.scores.push_back(scored[i].value);
        if (scored[i].parse_ok) {
            xs.push_back(*scored[i].value);
            ys.push_back(examples[i].gold);
        } else {
            ++rep.parse_failures;
        }
    }
    rep.n = xs.size();
    if (program.scale == Scale::binary) {
        rep.note = "binary scores against binary labels: Spearman reduces to a phi-type coefficient";
    }
    rep.valid = true;
    if (static_cast<double>(rep.parse_failures) > kMaxParseFailureRate * static_cast<double>(rep.n_total)) {
        rep.valid = false;
        rep.invalid_reason = "parse failures " + std::to_string(rep.parse_failures) + "/" + std::to_string(rep.n_total) +
                             " exceed 20%";
    }
    if (rep.n >= 2) {
        try {
            rep.rho_s = spearman_rho(xs, ys);
        } catch (const StatisticsError& e) {
            rep.valid = false;
            if (rep.invalid_reason.empty()) rep.invalid_reason = e.what();
        }
    }
    if (rep.rho_s && rep.n >= 4) rep.se = bonett_wright_se(*rep.rho_s, rep.n);
    if (!rep.se && rep.valid) {
        rep.valid = false;
        rep.invalid_reason = "fewer than 4 scored examples";
    }
    return rep;
}

}  // namespace ragcal
