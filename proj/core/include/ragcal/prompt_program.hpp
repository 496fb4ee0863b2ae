#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ragcal/util.hpp"

namespace ragcal {

enum class Scale { unit_interval, binary };

std::string to_string(Scale s);
Scale scale_from_string(std::string_view s);

/// One labeled demonstration: values for every input field plus the gold
/// output value.
struct Demo {
    std::map<std::string, std::string> inputs;
    double label = 0.0;

    friend bool operator==(const Demo&, const Demo&) = default;
};

/// A judge prompt: instruction, ordered demonstrations and the rule for
/// reading the verdict back out (`output_field` on the given scale).
struct PromptProgram {
    std::string metric_name;
    std::string instruction;
    std::vector<std::string> input_fields;
    std::vector<Demo> demos;
    std::string output_field;
    Scale scale = Scale::unit_interval;

    /// Throws ConfigError when the instruction lacks `output_field`, a demo
    /// misses an input field, or a demo label is off-scale.
    void validate() const;

    /// Demonstrations (as JSON objects), then the instruction, then the live
    /// input rendered the same way as the demonstrations minus the label.
    std::string render(const std::map<std::string, std::string>& inputs) const;

    std::string digest() const;

    json to_json() const;
    static PromptProgram from_json(const json& j);
    static PromptProgram load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const PromptProgram&, const PromptProgram&) = default;
};

/// Program assets shipped with the library.
PromptProgram answer_correctness_handcrafted();
PromptProgram answer_correctness_optimized();
PromptProgram answerability_handcrafted();

/// Resolves "optimized", "handcrafted" or a path to a program JSON file for
/// the named metric ("answer-correctness" or "answerability").
PromptProgram resolve_program(std::string_view metric, std::string_view which);

/// Text templates shipped with the library (generator prompt, faithfulness
/// prompts, taxonomy prompt, ...). Throws if `name` is unknown.
std::string_view builtin_asset(std::string_view name);
std::vector<std::string> builtin_asset_names();

}  // namespace ragcal
