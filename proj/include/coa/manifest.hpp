#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace coa {

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string digest_string(std::uint64_t digest);  // "fnv1a64:<hex>"

/// UTC timestamp "YYYY-MM-DDTHH:MM:SSZ". Honors SOURCE_DATE_EPOCH for
/// reproducible output trees.
std::string utc_timestamp();

// Provenance record written into every output directory.
struct RunManifest {
    std::string toolkit_version;
    std::string command;
    std::string config_hash;  // digest of the canonical config JSON
    std::string created_utc;
    std::map<std::string, std::string> input_digests;  // path -> digest
    std::map<std::string, std::string> stages;         // stage -> status
};

RunManifest make_manifest(const std::string& command, const nlohmann::json& config,
                          const std::vector<std::string>& input_paths);

nlohmann::json manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& out_dir);

}  // namespace coa
