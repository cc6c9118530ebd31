#include "mvindex/data_ingest.hpp"

#include "mvindex/errors.hpp"
#include "mvindex/numfmt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace mvindex {

ParseError::ParseError(std::string source, std::size_t row, std::size_t column, const std::string& what)
    : Error(fmt::format("{}:{}:{}: {}", source, row, column, what)),
      source_(std::move(source)),
      row_(row),
      column_(column) {}

namespace {

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

/// Splits into lines, dropping a UTF-8 byte-order mark and blank lines while
/// keeping the 1-based physical row number of each line.
std::vector<std::pair<std::size_t, std::string_view>> split_lines(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t row = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        ++row;
        auto line = text.substr(start, nl - start);
        if (!trim(line).empty()) lines.emplace_back(row, line);
        start = nl + 1;
    }
    return lines;
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

std::optional<Date> parse_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    const auto y = parse_int(s.substr(0, 4));
    const auto m = parse_int(s.substr(5, 2));
    const auto d = parse_int(s.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
    const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

}  // namespace

YearMonth YearMonth::of(const Date& d) {
    return YearMonth{static_cast<int>(d.year()), static_cast<unsigned>(d.month())};
}

YearMonth YearMonth::parse(std::string_view text) {
    text = trim(text);
    if (text.size() == 7 && text[4] == '-') {
        const auto y = parse_int(text.substr(0, 4));
        const auto m = parse_int(text.substr(5, 2));
        if (y && m && *m >= 1 && *m <= 12) return YearMonth{*y, static_cast<unsigned>(*m)};
    }
    throw ValidationError(fmt::format("invalid month label '{}' (expected YYYY-MM)", text));
}

YearMonth YearMonth::next() const {
    return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1};
}

std::string YearMonth::to_string() const { return fmt::format("{:04d}-{:02d}", year, month); }

std::string format_date(const Date& d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

bool MonthlyReturnTable::has_gaps() const {
    return std::find(gap_before.begin(), gap_before.end(), true) != gap_before.end();
}

MonthlyReturnTable MonthlyReturnTable::from_matrix(Eigen::MatrixXd returns, std::size_t market_index,
                                                   std::vector<std::string> tickers) {
    const auto n = static_cast<std::size_t>(returns.cols());
    if (tickers.empty()) {
        for (std::size_t i = 0; i < n; ++i) tickers.push_back(fmt::format("A{}", i));
    }
    if (tickers.size() != n) {
        throw ValidationError(fmt::format("{} tickers for {} return columns", tickers.size(), n));
    }
    if (n > 0 && market_index >= n) throw ValidationError("market index out of range");
    MonthlyReturnTable t;
    YearMonth ym{2000, 1};
    for (Eigen::Index r = 0; r < returns.rows(); ++r) {
        t.months.push_back(ym);
        ym = ym.next();
    }
    t.gap_before.assign(t.months.size(), false);
    t.tickers = std::move(tickers);
    t.market_index = market_index;
    t.returns = std::move(returns);
    return t;
}

DailyPriceTable parse_price_table(std::string_view csv, std::string_view market_ticker,
                                  const ParseOptions& options) {
    const auto& src = options.source;
    const auto lines = split_lines(csv);
    if (lines.empty()) throw ParseError(src, 1, 1, "empty price file");

    const auto [header_row, header_line] = lines.front();
    const auto header = split_fields(header_line);
    if (header.size() < 2 || header[0] != "date") {
        throw ParseError(src, header_row, 1, "header must be 'date,<ticker1>,...,<tickerN>'");
    }

    DailyPriceTable table;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw ParseError(src, header_row, c + 1, "empty ticker name");
        const std::string name{header[c]};
        if (std::find(table.tickers.begin(), table.tickers.end(), name) != table.tickers.end()) {
            throw ParseError(src, header_row, c + 1, fmt::format("duplicate ticker '{}'", name));
        }
        table.tickers.push_back(name);
    }
    const auto mkt = std::find(table.tickers.begin(), table.tickers.end(), market_ticker);
    if (mkt == table.tickers.end()) {
        throw ConfigurationError(
            fmt::format("{}: market ticker '{}' not present in header", src, market_ticker));
    }
    table.market_index = static_cast<std::size_t>(mkt - table.tickers.begin());

    const std::size_t n = table.tickers.size();
    std::vector<double> values;
    values.reserve((lines.size() - 1) * n);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto [row, line] = lines[li];
        const auto fields = split_fields(line);
        if (fields.size() != n + 1) {
            throw ParseError(src, row, std::min(fields.size(), n + 1) + 1,
                             fmt::format("expected {} fields, found {}", n + 1, fields.size()));
        }
        const auto date = parse_iso_date(fields[0]);
        if (!date) throw ParseError(src, row, 1, fmt::format("malformed date '{}'", fields[0]));
        if (!table.dates.empty()) {
            if (*date == table.dates.back()) {
                throw ValidationError(fmt::format("{}:{}: duplicate date {}", src, row, fields[0]));
            }
            if (*date < table.dates.back()) {
                throw ValidationError(
                    fmt::format("{}:{}: date {} out of order", src, row, fields[0]));
            }
        }
        table.dates.push_back(*date);
        for (std::size_t c = 0; c < n; ++c) {
            const auto field = fields[c + 1];
            if (field.empty()) {
                if (options.forward_fill && table.dates.size() > 1) {
                    values.push_back(values[values.size() - n]);
                    continue;
                }
                throw ParseError(src, row, c + 2, fmt::format("missing price for {}", table.tickers[c]));
            }
            const auto v = parse_double(field);
            if (!v) throw ParseError(src, row, c + 2, fmt::format("non-numeric price '{}'", field));
            if (!std::isfinite(*v) || *v <= 0.0) {
                throw ParseError(src, row, c + 2, fmt::format("price must be positive and finite, got '{}'", field));
            }
            values.push_back(*v);
        }
    }

    const auto t = static_cast<Eigen::Index>(table.dates.size());
    table.closes.resize(t, static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < t; ++r) {
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
            table.closes(r, c) = values[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
        }
    }
    return table;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigurationError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DailyPriceTable read_price_file(const std::filesystem::path& path, std::string_view market_ticker,
                                bool forward_fill) {
    return parse_price_table(read_text_file(path), market_ticker, ParseOptions{path.string(), forward_fill});
}

DailyPriceTable select_bom(const DailyPriceTable& prices) {
    if (prices.rows() == 0) throw InsufficientDataError("select_bom: empty price table");
    std::vector<Eigen::Index> keep;
    std::optional<YearMonth> current;
    for (std::size_t r = 0; r < prices.rows(); ++r) {
        const auto ym = YearMonth::of(prices.dates[r]);
        if (!current || ym != *current) {
            keep.push_back(static_cast<Eigen::Index>(r));
            current = ym;
        }
    }
    DailyPriceTable out;
    out.tickers = prices.tickers;
    out.market_index = prices.market_index;
    out.closes.resize(static_cast<Eigen::Index>(keep.size()), prices.closes.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.dates.push_back(prices.dates[static_cast<std::size_t>(keep[k])]);
        out.closes.row(static_cast<Eigen::Index>(k)) = prices.closes.row(keep[k]);
    }
    return out;
}

MonthlyReturnTable compute_monthly_returns(const DailyPriceTable& bom, const ReturnOptions& options) {
    if (bom.rows() < 2) {
        throw InsufficientDataError(
            fmt::format("monthly returns need at least 2 BOM rows, got {}", bom.rows()));
    }
    if ((bom.closes.array() <= 0.0).any() || !bom.closes.allFinite()) {
        throw ValidationError("monthly returns need strictly positive finite prices");
    }
    MonthlyReturnTable out;
    out.tickers = bom.tickers;
    out.market_index = bom.market_index;
    const Eigen::Index t = bom.closes.rows() - 1;
    out.returns = (bom.closes.bottomRows(t).array() - bom.closes.topRows(t).array()) /
                  bom.closes.topRows(t).array();
    for (Eigen::Index r = 1; r <= t; ++r) {
        const auto prev = YearMonth::of(bom.dates[static_cast<std::size_t>(r - 1)]);
        const auto cur = YearMonth::of(bom.dates[static_cast<std::size_t>(r)]);
        if (cur.ordinal() == prev.ordinal()) {
            throw ValidationError(fmt::format(
                "two rows in month {}; run select_bom before computing returns", cur.to_string()));
        }
        const bool gap = cur.ordinal() != prev.ordinal() + 1;
        if (gap && !options.allow_gaps) {
            throw ValidationError(fmt::format("missing month(s) between {} and {}",
                                              prev.to_string(), cur.to_string()));
        }
        out.months.push_back(cur);
        out.gap_before.push_back(gap);
    }
    return out;
}

double annual_to_monthly_rate(double annual) {
    if (!std::isfinite(annual)) throw ValidationError("annual rate must be finite");
    if (annual <= -1.0) throw ValidationError(fmt::format("annual rate {} must exceed -1", annual));
    return annual / 12.0;
}

RiskFreeSeries parse_risk_free(std::string_view csv, const std::string& source) {
    const auto lines = split_lines(csv);
    if (lines.empty()) throw ParseError(source, 1, 1, "empty risk-free file");
    const auto [header_row, header_line] = lines.front();
    const auto header = split_fields(header_line);
    if (header.size() != 2 || header[0] != "month" || header[1] != "annual_rate") {
        throw ParseError(source, header_row, 1, "header must be 'month,annual_rate'");
    }

    RiskFreeSeries s;
    std::vector<double> annual;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto [row, line] = lines[li];
        const auto fields = split_fields(line);
        if (fields.size() != 2) {
            throw ParseError(source, row, std::min<std::size_t>(fields.size(), 2) + 1,
                             fmt::format("expected 2 fields, found {}", fields.size()));
        }
        YearMonth ym;
        try {
            ym = YearMonth::parse(fields[0]);
        } catch (const ValidationError& e) {
            throw ParseError(source, row, 1, e.what());
        }
        if (!s.months.empty() && ym <= s.months.back()) {
            throw ValidationError(fmt::format("{}:{}: month {} duplicated or out of order", source, row,
                                              ym.to_string()));
        }
        const auto rate = parse_double(fields[1]);
        if (!rate || !std::isfinite(*rate)) {
            throw ParseError(source, row, 2, fmt::format("non-numeric rate '{}'", fields[1]));
        }
        if (*rate < 0.0 || *rate > 0.2) {
            s.warnings.push_back(fmt::format("{}:{}: annual rate {} outside [0, 0.2]", source, row,
                                             format_number(*rate)));
        }
        s.months.push_back(ym);
        annual.push_back(*rate);
    }
    s.annual_rates = Eigen::Map<const Eigen::VectorXd>(annual.data(), static_cast<Eigen::Index>(annual.size()));
    s.monthly_rates.resize(s.annual_rates.size());
    for (Eigen::Index i = 0; i < s.annual_rates.size(); ++i) {
        s.monthly_rates(i) = annual_to_monthly_rate(s.annual_rates(i));
    }
    return s;
}

RiskFreeSeries read_risk_free_file(const std::filesystem::path& path) {
    return parse_risk_free(read_text_file(path), path.string());
}

double average_risk_free(const RiskFreeSeries& series) {
    if (series.monthly_rates.size() == 0) throw InsufficientDataError("risk-free series is empty");
    return series.monthly_rates.mean();
}

void write_monthly_returns_csv(std::ostream& out, const MonthlyReturnTable& table) {
    out << "month";
    for (const auto& t : table.tickers) out << ',' << t;
    out << '\n';
    for (std::size_t r = 0; r < table.periods(); ++r) {
        out << table.months[r].to_string();
        for (std::size_t c = 0; c < table.assets(); ++c) {
            out << ',' << format_number(table.returns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        out << '\n';
    }
}

}  // namespace mvindex
