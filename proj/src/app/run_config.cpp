#include "run_config.hpp"

#include "mvindex/data_ingest.hpp"
#include "mvindex/errors.hpp"
#include "mvindex/optimizer.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace mvindex::app {

namespace {

const std::vector<std::string> known_formats = {"csv", "json", "svg"};

template <typename T>
T get(const nlohmann::json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

}  // namespace

CovarianceDenominator parse_denominator(const std::string& s) {
    if (s == "sample") return CovarianceDenominator::sample;
    if (s == "population") return CovarianceDenominator::population;
    throw ConfigurationError(fmt::format("denominator must be sample or population, got '{}'", s));
}

RegressionMode parse_regression(const std::string& s) {
    if (s == "raw") return RegressionMode::raw;
    if (s == "excess") return RegressionMode::excess;
    throw ConfigurationError(fmt::format("regression must be raw or excess, got '{}'", s));
}

bool RunConfig::wants(const std::string& format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

std::vector<Model> RunConfig::models() const {
    if (model == "mm") return {Model::MM};
    if (model == "im") return {Model::IM};
    return {Model::MM, Model::IM};
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j{{"prices", prices_path.filename().string()},
                     {"riskfree", riskfree_path.empty() ? std::string() : riskfree_path.filename().string()},
                     {"market", market_ticker},
                     {"model", model},
                     {"objective", objective},
                     {"constraint", constraint},
                     {"rf", rf_override ? nlohmann::json(*rf_override) : nlohmann::json(nullptr)},
                     {"denominator", std::string(to_string(denominator))},
                     {"regression", std::string(to_string(regression))},
                     {"seed", seed},
                     {"formats", formats},
                     {"grid", grid},
                     {"cloud", cloud},
                     {"forward_fill", forward_fill},
                     {"allow_gaps", allow_gaps},
                     {"include_inefficient", include_inefficient},
                     {"leverage_limit", leverage_limit},
                     {"box_bound", box_bound}};
    return j;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigurationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
    }
    if (!j.is_object()) throw ConfigurationError(fmt::format("{}: top level must be an object", path.string()));
    // Relative paths in the file are resolved against the file's directory.
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() || base.empty() ? fp : base / fp;
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "prices") config.prices_path = resolve(get<std::string>(j, key));
        else if (key == "riskfree") config.riskfree_path = resolve(get<std::string>(j, key));
        else if (key == "market") config.market_ticker = get<std::string>(j, key);
        else if (key == "model") config.model = get<std::string>(j, key);
        else if (key == "objective") config.objective = get<std::string>(j, key);
        else if (key == "constraint") config.constraint = get<std::string>(j, key);
        else if (key == "rf") config.rf_override = value.is_null() ? std::nullopt : std::optional(get<double>(j, key));
        else if (key == "denominator") config.denominator = parse_denominator(get<std::string>(j, key));
        else if (key == "regression") config.regression = parse_regression(get<std::string>(j, key));
        else if (key == "seed") config.seed = get<std::uint64_t>(j, key);
        else if (key == "out") config.output_dir = resolve(get<std::string>(j, key));
        else if (key == "formats") config.formats = get<std::vector<std::string>>(j, key);
        else if (key == "grid") config.grid = get<int>(j, key);
        else if (key == "cloud") config.cloud = get<int>(j, key);
        else if (key == "forward_fill") config.forward_fill = get<bool>(j, key);
        else if (key == "allow_gaps") config.allow_gaps = get<bool>(j, key);
        else if (key == "include_inefficient") config.include_inefficient = get<bool>(j, key);
        else if (key == "leverage_limit") config.leverage_limit = get<double>(j, key);
        else if (key == "box_bound") config.box_bound = get<double>(j, key);
        else if (key == "expected") config.expected_dir = resolve(get<std::string>(j, key));
        else throw ConfigurationError(fmt::format("{}: unknown config key '{}'", path.string(), key));
    }
}

void validate(const RunConfig& config, bool needs_riskfree) {
    auto require_file = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw ConfigurationError(fmt::format("no {} file given", what));
        if (!std::filesystem::is_regular_file(p)) {
            throw ConfigurationError(fmt::format("{} file not found: {}", what, p.string()));
        }
    };
    require_file(config.prices_path, "prices");
    if (needs_riskfree && !config.rf_override) require_file(config.riskfree_path, "risk-free");
    if (config.expected_dir && !std::filesystem::is_directory(*config.expected_dir)) {
        throw ConfigurationError(fmt::format("expected directory not found: {}", config.expected_dir->string()));
    }
    if (config.model != "mm" && config.model != "im" && config.model != "both") {
        throw ConfigurationError(fmt::format("model must be mm, im or both, got '{}'", config.model));
    }
    if (config.objective != "minvar" && config.objective != "maxsharpe" && config.objective != "both") {
        throw ConfigurationError(
            fmt::format("objective must be minvar, maxsharpe or both, got '{}'", config.objective));
    }
    (void)ConstraintSet::parse(config.constraint);
    for (const auto& f : config.formats) {
        if (std::find(known_formats.begin(), known_formats.end(), f) == known_formats.end()) {
            throw ConfigurationError(fmt::format("unknown output format '{}'", f));
        }
    }
    if (config.grid < 2) throw ConfigurationError("grid must be at least 2");
    if (config.cloud < 0) throw ConfigurationError("cloud must be nonnegative");
    if (config.market_ticker.empty()) throw ConfigurationError("market ticker must not be empty");
}

}  // namespace mvindex::app
