#pragma once

// Reproducibility manifests: every CLI run records its command line, the
// fully resolved configuration, seeds, and a SHA-256 digest of each output
// file.  A recorded run can be re-executed and byte-verified later.

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace selftrap {

inline std::string sha256_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("sha256: cannot open '" + path + "'");

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        if (ctx) EVP_MD_CTX_free(ctx);
        std::fclose(f);
        throw std::runtime_error("sha256: cannot initialize digest");
    }
    unsigned char buffer[1 << 16];
    std::size_t got;
    while ((got = std::fread(buffer, 1, sizeof buffer, f)) > 0)
        EVP_DigestUpdate(ctx, buffer, got);
    const bool read_ok = std::ferror(f) == 0;
    std::fclose(f);

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    const bool ok = EVP_DigestFinal_ex(ctx, digest, &digest_len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok || !read_ok) throw std::runtime_error("sha256: digest of '" + path + "' failed");

    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::uint64_t file_size_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot stat '" + path + "'");
    return static_cast<std::uint64_t>(f.tellg());
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buffer;
}

struct ManifestOutput {
    std::string path;
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string artifact_version = "0.1.0";
    std::vector<std::string> command;  // argv, including the program name
    std::vector<std::pair<std::string, double>> config;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string started_utc;
    std::string finished_utc;
    std::vector<ManifestOutput> outputs;

    void add_output(const std::string& path) {
        outputs.push_back({path, sha256_file(path), file_size_bytes(path)});
    }
};

inline void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::ordered_json j;
    j["artifact_version"] = manifest.artifact_version;
    j["command"] = manifest.command;
    nlohmann::ordered_json cfg;
    for (const auto& [key, value] : manifest.config) cfg[key] = value;
    j["config"] = cfg;
    j["seed"] = manifest.seed;
    j["threads"] = manifest.threads;
    j["started_utc"] = manifest.started_utc;
    j["finished_utc"] = manifest.finished_utc;
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& out : manifest.outputs)
        j["outputs"].push_back({{"path", out.path}, {"sha256", out.sha256},
                                {"bytes", out.bytes}});

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("manifest: cannot open '" + path + "' for writing");
    file << j.dump(2) << '\n';
    if (!file) throw std::runtime_error("manifest: write to '" + path + "' failed");
}

inline RunManifest read_manifest(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("manifest: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        file >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest: '" + path + "' is not valid JSON: " + e.what());
    }
    RunManifest m;
    try {
        m.artifact_version = j.at("artifact_version").get<std::string>();
        m.command = j.at("command").get<std::vector<std::string>>();
        for (const auto& [key, value] : j.at("config").items())
            m.config.emplace_back(key, value.get<double>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.threads = j.at("threads").get<int>();
        m.started_utc = j.value("started_utc", "");
        m.finished_utc = j.value("finished_utc", "");
        for (const auto& out : j.at("outputs"))
            m.outputs.push_back({out.at("path").get<std::string>(),
                                 out.at("sha256").get<std::string>(),
                                 out.at("bytes").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest: '" + path + "' is missing fields: " + e.what());
    }
    return m;
}

// Compares each recorded output against the file currently on disk.
// Returns a list of mismatch descriptions; empty means fully verified.
inline std::vector<std::string> verify_manifest_outputs(const RunManifest& manifest) {
    std::vector<std::string> mismatches;
    for (const auto& out : manifest.outputs) {
        try {
            const std::string digest = sha256_file(out.path);
            if (digest != out.sha256)
                mismatches.push_back(out.path + ": digest " + digest + " != recorded " +
                                     out.sha256);
        } catch (const std::exception& e) {
            mismatches.push_back(out.path + ": " + e.what());
        }
    }
    return mismatches;
}

}  // namespace selftrap
