#pragma once

// Run manifests and report emission. Every output file embeds the manifest
// hash, which covers the command, resolved config, seed and tool version
// but not the timestamp, so reruns are byte-identical modulo the timestamp
// field.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

namespace qcdcomm {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string version = kToolVersion;
    std::string timestamp;
    std::string hash;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace detail

inline RunManifest make_manifest(const std::string& command, const std::string& config_path,
                                 const nlohmann::json& resolved_config, std::uint64_t seed,
                                 const std::string& out_dir) {
    RunManifest m;
    m.command = command;
    m.config_path = config_path;
    m.seed = seed;
    m.out_dir = out_dir;
    m.timestamp = detail::iso_timestamp();
    m.hash = detail::fnv1a_hex(command + '\n' + resolved_config.dump() + '\n' +
                               std::to_string(seed) + '\n' + m.version);
    return m;
}

inline nlohmann::json manifest_json(const RunManifest& m) {
    return nlohmann::json{{"command", m.command}, {"config_path", m.config_path},
                          {"seed", m.seed},       {"out_dir", m.out_dir},
                          {"version", m.version}, {"timestamp", m.timestamp},
                          {"hash", m.hash}};
}

inline void write_json_report(const std::filesystem::path& path, const nlohmann::json& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body.dump(2) << '\n';
}

}  // namespace qcdcomm
