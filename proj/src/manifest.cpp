#include "coa/manifest.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coa/error.hpp"
#include "coa/version.hpp"

using json = nlohmann::json;

namespace coa {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for digesting");
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

std::string digest_string(std::uint64_t digest) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest));
    return std::string("fnv1a64:") + hex;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest make_manifest(const std::string& command, const json& config,
                          const std::vector<std::string>& input_paths) {
    RunManifest m;
    m.toolkit_version = kToolkitVersion;
    m.command = command;
    m.config_hash = digest_string(fnv1a64(config.dump()));
    m.created_utc = utc_timestamp();
    for (const auto& path : input_paths) {
        m.input_digests[path] = digest_string(fnv1a64_file(path));
    }
    return m;
}

json manifest_to_json(const RunManifest& manifest) {
    json inputs = json::object();
    for (const auto& [path, digest] : manifest.input_digests) inputs[path] = digest;
    json stages = json::object();
    for (const auto& [stage, status] : manifest.stages) stages[stage] = status;
    return {{"toolkit_version", manifest.toolkit_version},
            {"command", manifest.command},
            {"config_hash", manifest.config_hash},
            {"created_utc", manifest.created_utc},
            {"inputs", inputs},
            {"stages", stages}};
}

void write_manifest(const RunManifest& manifest, const std::string& out_dir) {
    const std::filesystem::path path = std::filesystem::path(out_dir) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest to '" + path.string() + "'");
    out << manifest_to_json(manifest).dump(2) << "\n";
}

}  // namespace coa
