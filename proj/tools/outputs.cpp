#include "outputs.hpp"

#include "bsp/errors.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>

#ifndef BSP_VERSION
#define BSP_VERSION "unknown"
#endif

namespace bsp::cli {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < length; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

OutputDir::OutputDir(std::filesystem::path dir, std::uint64_t seed) : dir_(std::move(dir)), seed_(seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw InputError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }
}

void OutputDir::write_bytes(const std::string& name, const std::string& bytes) {
    const std::filesystem::path path = dir_ / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << bytes;
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    outputs_.push_back({{"file", name}, {"sha256", sha256_hex(bytes)}});
}

void OutputDir::write_csv(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ostringstream out;
    out << "# manifest: " << kManifestName << ", seed: " << seed_ << "\n";
    body(out);
    write_bytes(name, out.str());
}

void OutputDir::write_json(const std::string& name, nlohmann::json doc) {
    doc["manifest"] = kManifestName;
    doc["seed"] = seed_;
    write_bytes(name, doc.dump(2) + "\n");
}

std::string OutputDir::read_input(const std::string& path) {
    std::string bytes = read_file(path);
    record_input(path, bytes);
    return bytes;
}

void OutputDir::record_input(const std::string& path, const std::string& bytes) {
    inputs_.push_back({{"path", path}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
}

void OutputDir::write_manifest(const std::string& command, const nlohmann::json& config) {
    nlohmann::json m;
    m["tool"] = "bsp";
    m["version"] = BSP_VERSION;
    m["command"] = command;
    m["seed"] = seed_;
    m["config"] = config;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    std::ofstream out(dir_ / kManifestName, std::ios::binary);
    out << m.dump(2) << "\n";
    if (!out) {
        throw std::runtime_error("cannot write the manifest");
    }
}

} // namespace bsp::cli
