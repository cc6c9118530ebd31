#pragma once

#include "mvindex/estimation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mvindex::app {

struct RunConfig {
    std::filesystem::path prices_path;
    std::filesystem::path riskfree_path;
    std::string market_ticker = "KLCI";
    std::string model = "both";      // mm | im | both
    std::string objective = "both";  // minvar | maxsharpe | both
    std::string constraint = "c3";   // c1..c5
    std::optional<double> rf_override;
    CovarianceDenominator denominator = CovarianceDenominator::sample;
    RegressionMode regression = RegressionMode::raw;
    std::uint64_t seed = 42;
    std::filesystem::path output_dir = "mvindex-out";
    std::vector<std::string> formats = {"csv", "json", "svg"};
    int grid = 100;
    int cloud = 1000;
    bool forward_fill = false;
    bool allow_gaps = false;
    bool include_inefficient = false;
    double leverage_limit = 2.0;
    double box_bound = 1.0;
    std::optional<std::filesystem::path> expected_dir;

    bool wants(const std::string& format) const;
    std::vector<Model> models() const;

    /// Reproducibility record: every field except the output directory.
    nlohmann::json to_json() const;
};

CovarianceDenominator parse_denominator(const std::string& s);
RegressionMode parse_regression(const std::string& s);

/// Overlays the keys of a JSON config file onto `config`. Unknown keys and
/// ill-typed values raise ConfigurationError.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Checks enumerated fields and that every input path exists. Raises
/// ConfigurationError before any computation starts.
void validate(const RunConfig& config, bool needs_riskfree);

}  // namespace mvindex::app
