#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace bsp::cli {

inline constexpr const char* kManifestName = "manifest.json";

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::string& path);

/**
 * Output directory of one run. Every file goes through here so the manifest can list it;
 * CSV files start with a `# manifest: manifest.json, seed: N` line, JSON documents carry
 * "manifest" and "seed" members.
 */
class OutputDir {
public:
    OutputDir(std::filesystem::path dir, std::uint64_t seed);

    void write_csv(const std::string& name, const std::function<void(std::ostream&)>& body);
    void write_json(const std::string& name, nlohmann::json doc);

    /// Records an input file and returns its contents.
    std::string read_input(const std::string& path);
    void record_input(const std::string& path, const std::string& bytes);

    void write_manifest(const std::string& command, const nlohmann::json& config);

private:
    void write_bytes(const std::string& name, const std::string& bytes);

    std::filesystem::path dir_;
    std::uint64_t seed_;
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json outputs_ = nlohmann::json::array();
};

} // namespace bsp::cli
