#include "ragcal/prompt_optimizer.hpp"

#include <set>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

void check_split(const std::vector<LabeledExample>& train, const std::vector<LabeledExample>& val) {
    std::set<std::string> seen;
    for (const auto& e : train) seen.insert(json_digest(json(e.inputs)));
    for (const auto& e : val) {
        if (seen.count(json_digest(json(e.inputs))) != 0) {
            throw InvalidArgument("optimizer: train and validation sets overlap");
        }
    }
}

std::string strip_wrapping(std::string s) {
    s = trim(s);
    for (const std::string q : {"\"\"\"", "```", "\""}) {
        if (s.size() >= 2 * q.size() && s.compare(0, q.size(), q) == 0 &&
            s.compare(s.size() - q.size(), q.size(), q) == 0) {
            s = trim(s.substr(q.size(), s.size() - 2 * q.size()));
        }
    }
    return s;
}

struct Proposal {
    std::optional<std::string> instruction;
    std::string status;
    std::string rejected_text;
};

Proposal propose(const ProposerClient& proposer, const std::string& prompt, const std::string& output_field,
                 std::uint64_t seed) {
    if (proposer.gateway == nullptr) throw InvalidArgument("proposer client has no gateway");
    ChatRequest req;
    req.model_name = proposer.endpoint.model_name;
    req.messages = {{"user", prompt}};
    req.temperature = proposer.temperature;
    req.seed = static_cast<std::int64_t>(seed & 0x7fffffffULL);
    try {
        std::string text = strip_wrapping(proposer.gateway->chat_complete(proposer.endpoint, req).text);
        if (text.empty()) return {std::nullopt, "proposer failure: empty reply", {}};
        if (text.find(output_field) == std::string::npos) {
            return {std::nullopt, "rejected: output field '" + output_field + "' missing", std::move(text)};
        }
        return {std::move(text), "", {}};
    } catch (const TransportError& e) {
        return {std::nullopt, std::string("proposer failure: ") + e.what(), {}};
    } catch (const ProtocolError& e) {
        return {std::nullopt, std::string("proposer failure: ") + e.what(), {}};
    }
}

TraceCandidate scored_candidate(std::size_t round, const PromptProgram& p, const EvaluationResult& r) {
    TraceCandidate c;
    c.round = round;
    c.digest = p.digest();
    c.instruction = p.instruction;
    c.n_demos = p.demos.size();
    c.train_score = r.score;
    c.status = r.valid ? "scored" : "invalid: " + r.invalid_reason;
    return c;
}

bool beats(const std::optional<double>& a, const std::optional<double>& b) { return a && (!b || *a > *b); }

}  // namespace

EvaluationResult evaluate_program(const PromptProgram& program, const std::vector<LabeledExample>& examples,
                                  const JudgeClient& judge, std::size_t workers) {
    if (examples.size() < kMinEvaluationExamples) {
        throw InvalidArgument("evaluate_program: need at least " + std::to_string(kMinEvaluationExamples) +
                              " examples, got " + std::to_string(examples.size()));
    }
    const AlignmentReport rep = validate_metric_alignment(program, examples, judge, workers);
    EvaluationResult out;
    out.n = rep.n;
    out.parse_failures = rep.parse_failures;
    out.valid = rep.valid;
    out.invalid_reason = rep.invalid_reason;
    if (rep.valid) out.score = rep.rho_s;
    return out;
}

PromptProgram labeled_few_shot(const PromptProgram& program, const std::vector<LabeledExample>& labeled,
                               std::size_t k, std::uint64_t seed) {
    if (k > labeled.size()) {
        throw InvalidArgument("labeled_few_shot: k=" + std::to_string(k) + " exceeds " +
                              std::to_string(labeled.size()) + " labeled examples");
    }
    PromptProgram out = program;
    Rng rng(seed);
    for (std::size_t i : sample_without_replacement(labeled.size(), k, rng)) {
        out.demos.push_back(Demo{labeled[i].inputs, labeled[i].gold});
    }
    out.validate();
    return out;
}

json to_json(const OptimizationTrace& t) {
    json cands = json::array();
    for (const auto& c : t.candidates) {
        cands.push_back({{"round", c.round},
                         {"digest", c.digest},
                         {"instruction", c.instruction},
                         {"n_demos", c.n_demos},
                         {"train_score", c.train_score ? json(*c.train_score) : json(nullptr)},
                         {"status", c.status}});
    }
    json best_so_far = json::array();
    for (const auto& b : t.best_so_far) best_so_far.push_back(b ? json(*b) : json(nullptr));
    return json{{"optimizer", t.optimizer},
                {"candidates", cands},
                {"best_so_far", best_so_far},
                {"best_digest", t.best_program.digest()},
                {"best_train_score", t.best_train_score ? json(*t.best_train_score) : json(nullptr)},
                {"val_score", t.validation.score ? json(*t.validation.score) : json(nullptr)},
                {"val_valid", t.validation.valid},
                {"iterations", t.iterations},
                {"train_size", t.train_size},
                {"val_size", t.val_size}};
}

OptimizationTrace copro_optimize(const PromptProgram& program, const std::vector<LabeledExample>& train,
                                 const std::vector<LabeledExample>& val, const JudgeClient& judge,
                                 const ProposerClient& proposer, const CoproOptions& options) {
    check_split(train, val);
    program.validate();
    OptimizationTrace trace;
    trace.optimizer = "copro";
    trace.train_size = train.size();
    trace.val_size = val.size();

    const EvaluationResult seed_eval = evaluate_program(program, train, judge, options.workers);
    trace.candidates.push_back(scored_candidate(0, program, seed_eval));
    trace.best_program = program;
    trace.best_train_score = seed_eval.score;
    trace.best_so_far.push_back(trace.best_train_score);

    const std::string tpl(builtin_asset("templates/copro_proposer.txt"));
    for (std::size_t round = 1; round <= options.depth; ++round) {
        std::string history;
        for (const auto& c : trace.candidates) {
            if (!c.train_score) continue;
            history += "- score " + format_fixed(*c.train_score, 3) + ": " + c.instruction + "\n";
        }
        if (history.empty()) history = "(none)\n";

        std::vector<Proposal> proposals(options.breadth);
        parallel_for(options.breadth, options.workers, [&](std::size_t i) {
            const std::string prompt =
                render_template(tpl, {{"output_field", program.output_field},
                                      {"instruction", trace.best_program.instruction},
                                      {"history", history},
                                      {"candidate_index", std::to_string(i + 1)}});
            proposals[i] = propose(proposer, prompt, program.output_field,
                                   derive_seed(options.seed, "copro/" + std::to_string(round) + "/" + std::to_string(i)));
        });

        std::optional<double> round_best;
        std::optional<PromptProgram> round_program;
        for (const auto& p : proposals) {
            if (!p.instruction) {
                TraceCandidate c;
                c.round = round;
                c.status = p.status;
                c.instruction = p.rejected_text;
                trace.candidates.push_back(c);
                continue;
            }
            PromptProgram cand = trace.best_program;
            cand.instruction = *p.instruction;
            const EvaluationResult r = evaluate_program(cand, train, judge, options.workers);
            trace.candidates.push_back(scored_candidate(round, cand, r));
            if (beats(r.score, round_best)) {
                round_best = r.score;
                round_program = cand;
            }
        }
        if (beats(round_best, trace.best_train_score)) {
            trace.best_train_score = round_best;
            trace.best_program = *round_program;
        }
        trace.best_so_far.push_back(trace.best_train_score);
        ++trace.iterations;
    }
    trace.validation = evaluate_program(trace.best_program, val, judge, options.workers);
    return trace;
}

OptimizationTrace mipro_lite(const PromptProgram& program, const std::vector<LabeledExample>& train,
                             const std::vector<LabeledExample>& val, const JudgeClient& judge,
                             const ProposerClient& proposer, const MiproOptions& options) {
    check_split(train, val);
    program.validate();
    if (options.demo_sizes.empty()) throw InvalidArgument("mipro_lite: empty demo size set");
    OptimizationTrace trace;
    trace.optimizer = "mipro_lite";
    trace.train_size = train.size();
    trace.val_size = val.size();
    trace.best_program = program;

    const std::string tpl(builtin_asset("templates/mipro_proposer.txt"));
    PromptProgram base = program;
    base.demos.clear();

    std::vector<Proposal> proposals(options.trials);
    parallel_for(options.trials, options.workers, [&](std::size_t t) {
        Rng rng(derive_seed(options.seed, "mipro/examples/" + std::to_string(t)));
        std::string examples;
        for (std::size_t i : sample_without_replacement(train.size(), std::min<std::size_t>(4, train.size()), rng)) {
            json row = train[i].inputs;
            row[program.output_field] = train[i].gold;
            examples += row.dump() + "\n";
        }
        const std::string prompt = render_template(tpl, {{"output_field", program.output_field},
                                                         {"instruction", program.instruction},
                                                         {"examples", examples},
                                                         {"candidate_index", std::to_string(t + 1)}});
        proposals[t] = propose(proposer, prompt, program.output_field,
                               derive_seed(options.seed, "mipro/propose/" + std::to_string(t)));
    });

    for (std::size_t t = 0; t < options.trials; ++t) {
        ++trace.iterations;
        if (!proposals[t].instruction) {
            TraceCandidate c;
            c.round = t + 1;
            c.status = proposals[t].status;
            c.instruction = proposals[t].rejected_text;
            trace.candidates.push_back(c);
            trace.best_so_far.push_back(trace.best_train_score);
            continue;
        }
        Rng rng(derive_seed(options.seed, "mipro/demos/" + std::to_string(t)));
        const std::size_t size =
            std::min(options.demo_sizes[rng.uniform_index(options.demo_sizes.size())], train.size());
        PromptProgram cand = base;
        cand.instruction = *proposals[t].instruction;
        cand = labeled_few_shot(cand, train, size, rng.next_u64());
        const EvaluationResult r = evaluate_program(cand, train, judge, options.workers);
        trace.candidates.push_back(scored_candidate(t + 1, cand, r));
        if (beats(r.score, trace.best_train_score)) {
            trace.best_train_score = r.score;
            trace.best_program = cand;
        }
        trace.best_so_far.push_back(trace.best_train_score);
    }
    trace.validation = evaluate_program(trace.best_program, val, judge, options.workers);
    return trace;
}

}  // namespace ragcal
