#include "ragcal/prompt_program.hpp"

#include <utility>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbeddedAssets[];
extern const std::size_t kEmbeddedAssetCount;
}  // namespace detail

namespace {

nlohmann::ordered_json demo_object(const std::vector<std::string>& fields,
                                   const std::map<std::string, std::string>& inputs) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& f : fields) {
        auto it = inputs.find(f);
        obj[f] = it == inputs.end() ? std::string() : it->second;
    }
    return obj;
}

std::string indent_block(const std::string& s, const std::string& pad) {
    std::string out;
    for (const auto& line : split_lines(s)) {
        out += pad + line + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace

std::string to_string(Scale s) { return s == Scale::binary ? "binary" : "unit_interval"; }

Scale scale_from_string(std::string_view s) {
    if (s == "binary") return Scale::binary;
    if (s == "unit_interval" || s == "unit-interval") return Scale::unit_interval;
    throw ConfigError("unknown scale '" + std::string(s) + "'");
}

void PromptProgram::validate() const {
    if (output_field.empty()) throw ConfigError("prompt program " + metric_name + " has no output_field");
    if (instruction.find(output_field) == std::string::npos) {
        throw ConfigError("prompt program " + metric_name + ": instruction does not contain output field '" +
                          output_field + "'");
    }
    if (input_fields.empty()) throw ConfigError("prompt program " + metric_name + " has no input fields");
    for (std::size_t i = 0; i < demos.size(); ++i) {
        for (const auto& f : input_fields) {
            if (demos[i].inputs.count(f) == 0) {
                throw ConfigError("prompt program " + metric_name + ": demo " + std::to_string(i) +
                                  " lacks field '" + f + "'");
            }
        }
        const double l = demos[i].label;
        const bool ok = scale == Scale::binary ? (l == 0.0 || l == 1.0) : (l >= 0.0 && l <= 1.0);
        if (!ok) throw ConfigError("prompt program " + metric_name + ": demo label off scale");
    }
}

std::string PromptProgram::render(const std::map<std::string, std::string>& inputs) const {
    std::string out;
    if (!demos.empty()) {
        for (std::size_t i = 0; i < demos.size(); ++i) {
            auto obj = demo_object(input_fields, demos[i].inputs);
            if (scale == Scale::binary) {
                obj[output_field] = static_cast<int>(demos[i].label);
            } else {
                obj[output_field] = demos[i].label;
            }
            out += indent_block(obj.dump(4), "  ");
            out += i + 1 < demos.size() ? ",\n" : "\n";
        }
        out += "\n";
    }
    out += instruction;
    out += "\n\n";
    out += demo_object(input_fields, inputs).dump(4);
    out += "\n";
    return out;
}

std::string PromptProgram::digest() const { return json_digest(to_json()); }

json PromptProgram::to_json() const {
    json d = json::array();
    for (const auto& demo : demos) d.push_back({{"inputs", demo.inputs}, {"label", demo.label}});
    return json{{"metric_name", metric_name}, {"instruction", instruction}, {"input_fields", input_fields},
                {"demos", d},           {"output_field", output_field}, {"scale", to_string(scale)}};
}

PromptProgram PromptProgram::from_json(const json& j) {
    static const std::vector<std::string> kKeys = {"metric_name", "instruction", "input_fields",
                                                   "demos",       "output_field", "scale"};
    for (const auto& [k, _] : j.items()) {
        if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
            throw ConfigError("prompt program: unknown key '" + k + "'");
        }
    }
    PromptProgram p;
    try {
        p.metric_name = j.at("metric_name").get<std::string>();
        p.instruction = j.at("instruction").get<std::string>();
        p.input_fields = j.at("input_fields").get<std::vector<std::string>>();
        p.output_field = j.at("output_field").get<std::string>();
        p.scale = scale_from_string(j.at("scale").get<std::string>());
        for (const auto& d : j.value("demos", json::array())) {
            p.demos.push_back(Demo{d.at("inputs").get<std::map<std::string, std::string>>(), d.at("label").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("prompt program: ") + e.what());
    }
    p.validate();
    return p;
}

PromptProgram PromptProgram::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError("prompt program " + path.string() + ": " + e.what());
    }
}

void PromptProgram::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json().dump(2) + "\n");
}

std::string_view builtin_asset(std::string_view name) {
    for (std::size_t i = 0; i < detail::kEmbeddedAssetCount; ++i) {
        if (detail::kEmbeddedAssets[i].first == name) return detail::kEmbeddedAssets[i].second;
    }
    throw Error("unknown builtin asset '" + std::string(name) + "'");
}

std::vector<std::string> builtin_asset_names() {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < detail::kEmbeddedAssetCount; ++i) names.emplace_back(detail::kEmbeddedAssets[i].first);
    return names;
}

PromptProgram answer_correctness_handcrafted() {
    return PromptProgram::from_json(json::parse(builtin_asset("prompts/answer_correctness_handcrafted.json")));
}

PromptProgram answer_correctness_optimized() {
    return PromptProgram::from_json(json::parse(builtin_asset("prompts/answer_correctness_optimized.json")));
}

PromptProgram answerability_handcrafted() {
    return PromptProgram::from_json(json::parse(builtin_asset("prompts/answerability_handcrafted.json")));
}

PromptProgram resolve_program(std::string_view metric, std::string_view which) {
    const bool ac = metric == "answer-correctness" || metric == "answer_correctness";
    const bool ans = metric == "answerability";
    if (!ac && !ans) throw ConfigError("unknown judge metric '" + std::string(metric) + "'");
    if (which.empty() || which == "default") which = ac ? "optimized" : "handcrafted";
    if (which == "handcrafted") return ac ? answer_correctness_handcrafted() : answerability_handcrafted();
    if (which == "optimized") {
        if (ans) throw ConfigError("answerability ships only the handcrafted program");
        return answer_correctness_optimized();
    }
    return PromptProgram::load(std::filesystem::path(which));
}

}  // namespace ragcal
