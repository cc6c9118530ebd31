#include "outputs.hpp"

#include "mvindex/errors.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace mvindex::app {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

OutputWriter::OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigurationError(fmt::format("cannot create output directory {}: {}", dir_.string(), ec.message()));
}

void OutputWriter::write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw ConfigurationError(fmt::format("cannot write {}", path.string()));
    written_.emplace_back(name, sha256_hex(content));
}

nlohmann::json OutputWriter::manifest_entries() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [name, hash] : written_) j.push_back({{"file", name}, {"sha256", hash}});
    return j;
}

}  // namespace mvindex::app
