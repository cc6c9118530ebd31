#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mvindex::app {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Writes files into one output directory and remembers their digests.
class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    void write(const std::string& name, const std::string& content);
    /// `{name: sha256}` for every file written so far, in write order.
    nlohmann::json manifest_entries() const;

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> written_;
};

}  // namespace mvindex::app
