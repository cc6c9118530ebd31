#pragma once

// JSON and CSV forms of estimates, solutions, curves and comparison reports,
// and per-cell deltas against a transcribed reference table.

#include "mvindex/estimation.hpp"
#include "mvindex/frontier.hpp"
#include "mvindex/optimizer.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvindex {

nlohmann::json to_json(const MarkowitzEstimates& mm);
nlohmann::json to_json(const IndexModelEstimates& im);
/// `weights` is keyed by ticker.
nlohmann::json to_json(const PortfolioSolution& sol, const std::vector<std::string>& tickers);
nlohmann::json to_json(const ComparisonReport& report);

/// `stdev,return` with header.
void write_points_csv(std::ostream& out, const std::vector<RiskReturn>& points);

/// One row per constraint x model x objective; one column per ticker then
/// Return, StDev, Sharpe.
void write_comparison_csv(std::ostream& out, const ComparisonReport& report);

Objective parse_objective(std::string_view text);
Model parse_model(std::string_view text);

/// A row of a reference table: `[table,]constraint,model,objective,<tickers>,Return,StDev,Sharpe`.
struct ExpectedRow {
    std::string table;
    std::string constraint;  // c1..c5, or a free label for non-solver rows
    std::string model;       // MM | IM
    std::string objective;   // min_variance | max_sharpe | free label
    std::vector<std::pair<std::string, double>> weights;
    std::optional<double> ret, stdev, sharpe;
};

std::vector<ExpectedRow> parse_expected_table(std::string_view csv, const std::string& source = "<input>");

struct CellDelta {
    std::string constraint;
    std::string model;
    std::string objective;
    std::string expected_table;
    std::map<std::string, double> weight_delta;  // computed - expected
    std::optional<double> ret_delta, stdev_delta, sharpe_delta;
};

/// Matches report rows to expected rows on (constraint, model, objective).
std::vector<CellDelta> diff_against_expected(const ComparisonReport& report, const std::vector<ExpectedRow>& expected);

void write_deltas_csv(std::ostream& out, const std::vector<CellDelta>& deltas, const std::vector<std::string>& tickers);

}  // namespace mvindex
