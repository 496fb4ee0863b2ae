#include "ragcal/report.hpp"

#include <sstream>

#include "ragcal/errors.hpp"
#include "ragcal/rag_harness.hpp"

namespace ragcal {
namespace {

constexpr const char* kManifestName = "manifest.json";

std::string num(const json& v, int decimals = 3) {
    if (v.is_null()) return "n/a";
    if (v.is_number()) return format_fixed(v.get<double>(), decimals);
    return v.dump();
}

std::string str(const json& obj, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return "";
    return obj[key].is_string() ? obj[key].get<std::string>() : obj[key].dump();
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string markdown() const {
        std::ostringstream os;
        os << '|';
        for (const auto& h : header) os << ' ' << h << " |";
        os << "\n|";
        for (std::size_t i = 0; i < header.size(); ++i) os << "---|";
        os << '\n';
        for (const auto& r : rows) {
            os << '|';
            for (const auto& c : r) os << ' ' << c << " |";
            os << '\n';
        }
        return os.str();
    }

    std::string csv(const std::string& digest) const {
        auto field = [](const std::string& s) {
            if (s.find_first_of(",\"\n") == std::string::npos) return s;
            std::string out = "\"";
            for (char c : s) {
                if (c == '"') out += '"';
                out += c;
            }
            return out + "\"";
        };
        std::ostringstream os;
        os << "# config_digest=" << digest << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << field(header[i]);
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << field(r[i]);
            os << '\n';
        }
        return os.str();
    }
};

struct Section {
    std::string name;
    std::string title;
    std::vector<std::pair<std::string, Table>> tables;  ///< (suffix, table)
    std::string digest;
};

const std::vector<std::pair<const char*, const char*>> kMetricColumns = {
    {"answer_correctness", "Answer Correctness"}, {"faithfulness", "Faithfulness"}, {"answer_relevance", "Answer Relevancy"}};

Section render_section(const std::string& name, const json& a) {
    Section s;
    s.name = name;
    s.digest = str(a, "config_digest");
    if (name == "alignment") {
        s.title = "Metric alignment";
        const auto& r = a.at("report");
        std::string rho = num(r.at("rho_s"));
        if (!r.at("se").is_null()) rho += " (SE " + num(r.at("se")) + ")";
        if (!r.value("valid", false)) rho += " [invalid: " + str(r, "invalid_reason") + "]";
        Table t{{"Method", "Model", "ρs", "n", "Parse failures"}, {}};
        t.rows.push_back({str(a, "method"), str(r, "judge_model"), rho, str(r, "n"), str(r, "parse_failures")});
        s.tables.push_back({"", t});
    } else if (name == "retrieval") {
        s.title = "Retrieval";
        Table t{{"Embedder", "Domain", "k", "Recall@k", "MRR@k", "n"}, {}};
        for (const auto& row : a.at("rows")) {
            t.rows.push_back({str(a, "embedder"), str(a, "domain"), str(row, "k"), num(row.at("recall_at_k")),
                              num(row.at("mrr_at_k")), str(a, "n")});
        }
        s.tables.push_back({"", t});
    } else if (name == "eval_rag") {
        s.title = "RAG evaluation";
        const auto& agg = a.at("aggregates");
        Table t{{"Generator", "Domain", "k", "Answer Correctness", "Faithfulness", "Answer Relevancy", "Recall@k",
                 "MRR@k", "n", "Failed"},
                {}};
        std::vector<std::string> row{str(a, "generator"), str(a, "domain"), str(agg, "k")};
        for (const auto& [m, _] : kMetricColumns) row.push_back(num(agg.at("metrics").at(m).at("mean")));
        row.push_back(num(agg.at("recall_at_k")));
        row.push_back(num(agg.at("mrr_at_k")));
        row.push_back(str(agg, "n_questions"));
        row.push_back(str(agg, "failed_questions"));
        t.rows.push_back(row);
        s.tables.push_back({"", t});
    } else if (name == "ablation") {
        s.title = "Chunk-count ablation";
        Table t{{"Metric", "Domain"}, {}};
        for (const auto& run : a.at("runs")) t.header.push_back("k=" + str(run, "k"));
        for (const auto& [m, label] : kMetricColumns) {
            std::vector<std::string> row{label, str(a, "domain")};
            for (const auto& run : a.at("runs")) row.push_back(num(run.at("metrics").at(m).at("mean")));
            t.rows.push_back(row);
        }
        s.tables.push_back({"", t});
    } else if (name == "failures") {
        s.title = "Low answer-correctness reasons";
        const auto& an = a.at("analysis");
        Table counts{{"Category", "Count", "% of QAs"}, {}};
        for (const auto& cat : failure_categories()) {
            counts.rows.push_back({cat, an.at("counts").value(cat, json(0)).dump(),
                                   num(an.at("percentages").value(cat, json(0.0)), 1)});
        }
        counts.rows.push_back({"No Failures", str(an, "n_no_failures"), num(an.at("percentages").at("No Failures"), 1)});
        counts.rows.push_back({"Judge failures (excluded)", str(an, "n_judge_failures"), ""});
        s.tables.push_back({"", counts});
        Table q{{"Score bucket", "n"}, {}};
        for (const auto& cat : failure_categories()) q.header.push_back(cat);
        for (const auto& b : an.at("quartiles")) {
            std::vector<std::string> row{"[" + num(b.at("lo"), 2) + ", " + num(b.at("hi"), 2) + ")", str(b, "n")};
            for (const auto& cat : failure_categories()) {
                row.push_back(b.at("counts").contains(cat) ? b.at("counts").at(cat).dump() : "0");
            }
            q.rows.push_back(row);
        }
        s.tables.push_back({"_quartiles", q});
    } else if (name == "generation") {
        s.title = "QA generation";
        const auto& st = a.at("stats");
        Table t{{"Requested", "Attempts", "Accepted"}, {}};
        std::vector<std::string> row{str(st, "requested"), str(st, "attempts"), str(st, "accepted")};
        for (const auto& [reason, n] : st.at("rejected_by_metric").items()) {
            t.header.push_back("Rejected: " + reason);
            row.push_back(n.dump());
        }
        t.rows.push_back(row);
        s.tables.push_back({"", t});
    } else if (name == "optimization") {
        s.title = "Prompt optimization";
        const auto& tr = a.at("trace");
        Table t{{"Optimizer", "Metric", "Iterations", "Candidates", "Best train ρs", "Validation ρs", "Best digest"}, {}};
        t.rows.push_back({str(tr, "optimizer"), str(a, "metric"), str(tr, "iterations"),
                          std::to_string(tr.at("candidates").size()), num(tr.at("best_train_score")),
                          num(tr.at("val_score")), str(tr, "best_digest").substr(0, 12)});
        s.tables.push_back({"", t});
    } else if (name == "self_bias") {
        s.title = "Self-preference by dataset origin";
        const auto& m = a.at("matrix");
        Table t{{"Evaluated Model", "Metric", "Dataset Origin", "Score"}, {}};
        for (const auto& c : m.at("cells")) {
            std::string score = num(c.at("score"));
            if (c.value("best", false)) score = "**" + score + "**";
            t.rows.push_back({str(c, "evaluated_model"), str(c, "metric"), str(c, "dataset_origin"), score});
        }
        s.tables.push_back({"", t});
    } else if (name == "ingest") {
        s.title = "Corpus";
        Table t{{"Documents", "Chunks", "File errors", "Warnings"}, {}};
        t.rows.push_back({str(a, "n_documents"), str(a, "n_chunks"), std::to_string(a.at("errors").size()),
                          std::to_string(a.at("warnings").size())});
        s.tables.push_back({"", t});
    }
    return s;
}

}  // namespace

ArtifactManifest ArtifactManifest::load(const std::filesystem::path& output_dir) {
    const auto path = output_dir / kManifestName;
    if (!std::filesystem::exists(path)) {
        throw PipelineError("missing artifact 'manifest' (" + path.string() + ")");
    }
    ArtifactManifest m;
    const json j = json::parse(read_file(path));
    for (const auto& [name, e] : j.at("artifacts").items()) {
        m.artifacts[name] = Entry{e.at("file").get<std::string>(), e.value("command", ""), e.value("config_digest", "")};
    }
    const json prov = j.value("provenance", json::object());
    for (const auto& [cmd, p] : prov.items()) m.provenance[cmd] = p;
    return m;
}

ArtifactManifest ArtifactManifest::load_or_empty(const std::filesystem::path& output_dir) {
    if (!std::filesystem::exists(output_dir / kManifestName)) return {};
    return load(output_dir);
}

json ArtifactManifest::to_json() const {
    json arts = json::object();
    for (const auto& [name, e] : artifacts) {
        arts[name] = {{"file", e.file}, {"command", e.command}, {"config_digest", e.config_digest}};
    }
    json prov = json::object();
    for (const auto& [cmd, p] : provenance) prov[cmd] = p;
    return json{{"artifacts", arts}, {"provenance", prov}};
}

void ArtifactManifest::save(const std::filesystem::path& output_dir) const {
    write_file_atomic(output_dir / kManifestName, to_json().dump(2) + "\n");
}

void write_artifacts(const std::filesystem::path& output_dir, const std::string& command, const RunConfig& cfg,
                     const std::map<std::string, std::pair<std::string, std::string>>& artifacts,
                     const json& provenance) {
    std::filesystem::create_directories(output_dir);
    ArtifactManifest m = ArtifactManifest::load_or_empty(output_dir);
    const std::string digest = config_digest(cfg);
    for (const auto& [name, file] : artifacts) {
        write_file_atomic(output_dir / file.first, file.second);
        m.artifacts[name] = ArtifactManifest::Entry{file.first, command, digest};
    }
    json prov = provenance;
    prov["config_digest"] = digest;
    prov["seed"] = cfg.seed;
    m.provenance[command] = prov;
    m.save(output_dir);
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw ConfigError("unknown report format '" + s + "' (csv, json, markdown)");
}

std::vector<std::filesystem::path> emit_report(const std::filesystem::path& output_dir, ReportFormat format) {
    const ArtifactManifest manifest = ArtifactManifest::load(output_dir);
    std::map<std::string, json> loaded;
    for (const auto& [name, e] : manifest.artifacts) {
        const auto path = output_dir / e.file;
        if (!std::filesystem::exists(path)) {
            throw PipelineError("missing artifact '" + name + "' (" + path.string() + ")");
        }
        if (path.extension() == ".json") {
            try {
                loaded[name] = json::parse(read_file(path));
            } catch (const json::parse_error& err) {
                throw PipelineError("artifact '" + name + "' is not valid JSON: " + err.what());
            }
        }
    }

    std::vector<Section> sections;
    for (const auto& [name, a] : loaded) {
        Section s = render_section(name, a);
        if (!s.tables.empty()) sections.push_back(std::move(s));
    }

    std::vector<std::filesystem::path> written;
    if (format == ReportFormat::json) {
        json out{{"manifest", manifest.to_json()}, {"artifacts", loaded}};
        const auto path = output_dir / "report.json";
        write_file_atomic(path, out.dump(2) + "\n");
        written.push_back(path);
    } else if (format == ReportFormat::csv) {
        for (const auto& s : sections) {
            for (const auto& [suffix, t] : s.tables) {
                const auto path = output_dir / ("report_" + s.name + suffix + ".csv");
                write_file_atomic(path, t.csv(s.digest));
                written.push_back(path);
            }
        }
    } else {
        std::ostringstream md;
        md << "# ragcal report\n\n## Provenance\n\n";
        Table prov{{"Command", "Config digest", "Seed", "Models", "Cache hits", "Cache misses", "HTTP calls"}, {}};
        for (const auto& [cmd, p] : manifest.provenance) {
            std::string models;
            const json roles = p.value("models", json::object());
            for (const auto& [role, name] : roles.items()) {
                if (!models.empty()) models += "; ";
                models += role + "=" + (name.is_string() ? name.get<std::string>() : name.dump());
            }
            const json g = p.value("gateway", json::object());
            prov.rows.push_back({cmd, str(p, "config_digest"), str(p, "seed"), models, str(g, "cache_hits"),
                                 str(g, "cache_misses"), str(g, "http_calls")});
        }
        md << prov.markdown() << '\n';
        md << "Artifacts:\n\n";
        for (const auto& [name, e] : manifest.artifacts) md << "- `" << name << "`: " << e.file << '\n';
        for (const auto& s : sections) {
            md << "\n## " << s.title << "\n\nconfig digest: `" << s.digest << "`\n\n";
            for (const auto& [_, t] : s.tables) md << t.markdown() << '\n';
        }
        const auto path = output_dir / "report.md";
        write_file_atomic(path, md.str());
        written.push_back(path);
    }
    return written;
}

}  // namespace ragcal
