#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ragcal/run_config.hpp"

namespace ragcal {

/// `manifest.json` in an output directory: which artifacts exist, which
/// command and config digest produced each, and per-command provenance.
struct ArtifactManifest {
    struct Entry {
        std::string file;  ///< relative to the output directory
        std::string command;
        std::string config_digest;
    };
    std::map<std::string, Entry> artifacts;
    std::map<std::string, json> provenance;  ///< command -> {config_digest, seed, models, gateway}

    static ArtifactManifest load(const std::filesystem::path& output_dir);
    /// Empty manifest when the directory has none yet.
    static ArtifactManifest load_or_empty(const std::filesystem::path& output_dir);
    void save(const std::filesystem::path& output_dir) const;
    json to_json() const;
};

/// Writes each artifact (name -> (file name, contents)) and records it in
/// the manifest together with the command's provenance block.
void write_artifacts(const std::filesystem::path& output_dir, const std::string& command, const RunConfig& cfg,
                     const std::map<std::string, std::pair<std::string, std::string>>& artifacts,
                     const json& provenance);

enum class ReportFormat { csv, json, markdown };
ReportFormat report_format_from_string(const std::string& s);

/// Renders every artifact listed in the manifest. Throws PipelineError
/// naming the first artifact whose file is missing. Output is a pure
/// function of the artifact files, so re-running is byte-idempotent.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& output_dir, ReportFormat format);

}  // namespace ragcal
