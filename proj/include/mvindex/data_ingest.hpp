#pragma once

// Daily price and risk-free ingestion, beginning-of-month selection and
// monthly simple returns.

#include <Eigen/Dense>

#include <chrono>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mvindex {

using Date = std::chrono::year_month_day;

/// Calendar month label.
struct YearMonth {
    int year = 0;
    unsigned month = 1;  // 1..12

    static YearMonth of(const Date& d);
    /// Parses `YYYY-MM`; throws ValidationError on malformed text.
    static YearMonth parse(std::string_view text);

    /// Months since year 0; consecutive months differ by exactly one.
    int ordinal() const { return year * 12 + static_cast<int>(month) - 1; }
    YearMonth next() const;
    std::string to_string() const;

    auto operator<=>(const YearMonth&) const = default;
};

std::string format_date(const Date& d);

struct DailyPriceTable {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    std::size_t market_index = 0;
    Eigen::MatrixXd closes;  // rows = dates, cols = tickers

    std::size_t rows() const { return dates.size(); }
    std::size_t assets() const { return tickers.size(); }
    const std::string& market_ticker() const { return tickers.at(market_index); }
};

struct MonthlyReturnTable {
    /// Label of each return row: the month whose BOM price closes the period.
    std::vector<YearMonth> months;
    /// gap_before[t] is true when months[t] does not directly follow the
    /// previous BOM month (only possible with ReturnOptions::allow_gaps).
    std::vector<bool> gap_before;
    std::vector<std::string> tickers;
    std::size_t market_index = 0;
    Eigen::MatrixXd returns;  // T x N

    std::size_t periods() const { return static_cast<std::size_t>(returns.rows()); }
    std::size_t assets() const { return static_cast<std::size_t>(returns.cols()); }
    bool has_gaps() const;

    /// Wraps a bare return matrix. Tickers default to A0..A{N-1}; months are
    /// consecutive starting at 2000-01.
    static MonthlyReturnTable from_matrix(Eigen::MatrixXd returns, std::size_t market_index,
                                          std::vector<std::string> tickers = {});
};

struct RiskFreeSeries {
    std::vector<YearMonth> months;
    Eigen::VectorXd annual_rates;
    Eigen::VectorXd monthly_rates;
    /// Non-fatal notes, e.g. rates outside the usual [0, 0.2] per-annum band.
    std::vector<std::string> warnings;

    std::size_t size() const { return months.size(); }
};

struct ParseOptions {
    /// Name used in error messages (file path or "<memory>").
    std::string source = "<input>";
    /// Fill empty price cells from the previous row instead of failing.
    bool forward_fill = false;
};

DailyPriceTable parse_price_table(std::string_view csv, std::string_view market_ticker,
                                  const ParseOptions& options = {});
DailyPriceTable read_price_file(const std::filesystem::path& path, std::string_view market_ticker,
                                bool forward_fill = false);

/// Keeps the first trading day of every calendar month present.
DailyPriceTable select_bom(const DailyPriceTable& prices);

struct ReturnOptions {
    /// Accept BOM series with missing calendar months; such rows are flagged.
    bool allow_gaps = false;
};

/// (P[t+1] - P[t]) / P[t] for every consecutive pair of rows.
MonthlyReturnTable compute_monthly_returns(const DailyPriceTable& bom_prices,
                                           const ReturnOptions& options = {});

/// Nominal annual rate to monthly rate: annual / 12.
double annual_to_monthly_rate(double annual);

RiskFreeSeries parse_risk_free(std::string_view csv, const std::string& source = "<input>");
RiskFreeSeries read_risk_free_file(const std::filesystem::path& path);

double average_risk_free(const RiskFreeSeries& series);

void write_monthly_returns_csv(std::ostream& out, const MonthlyReturnTable& table);

/// Whole-file read; throws ConfigurationError when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mvindex
