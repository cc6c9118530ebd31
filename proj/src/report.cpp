#include "mvindex/report.hpp"

#include "mvindex/errors.hpp"
#include "mvindex/numfmt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <ostream>

namespace mvindex {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    return rows;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto p = line.find(',', start);
        out.push_back(trim(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

json to_json(const MarkowitzEstimates& mm) {
    return json{{"tickers", mm.tickers},
                {"sample_size", mm.sample_size},
                {"denominator", std::string(to_string(mm.denominator))},
                {"mean", vec(mm.mean)},
                {"cov", mat(mm.cov)},
                {"corr", mat(mm.corr)}};
}

json to_json(const IndexModelEstimates& im) {
    return json{{"tickers", im.tickers},
                {"market", im.tickers.empty() ? std::string() : im.tickers.at(im.market_index)},
                {"sample_size", im.sample_size},
                {"mode", std::string(to_string(im.mode))},
                {"rf_used", im.rf_used},
                {"alpha", vec(im.alpha)},
                {"beta", vec(im.beta)},
                {"resid_var", vec(im.resid_var)},
                {"market_mean", im.market_mean},
                {"market_var", im.market_var}};
}

json to_json(const PortfolioSolution& sol, const std::vector<std::string>& tickers) {
    if (tickers.size() != static_cast<std::size_t>(sol.weights.size())) {
        throw ValidationError("ticker count does not match solution weights");
    }
    json weights = json::object();
    for (std::size_t i = 0; i < tickers.size(); ++i) weights[tickers[i]] = sol.weights(static_cast<Eigen::Index>(i));
    json j{{"weights", weights},
           {"return", num(sol.stats.ret)},
           {"stdev", num(sol.stats.stdev)},
           {"sharpe", num(sol.stats.sharpe)},
           {"model", std::string(to_string(sol.stats.model))},
           {"objective", std::string(to_string(sol.objective))},
           {"constraint", sol.constraint.code()},
           {"constraint_description", sol.constraint.description()},
           {"kkt_residual", num(sol.kkt_residual)},
           {"iterations", sol.iterations},
           {"converged", sol.converged},
           {"regularization_applied", sol.regularization_applied}};
    if (sol.regularization_applied) j["ridge"] = sol.ridge;
    if (sol.objective == Objective::target_return) j["target"] = sol.target;
    return j;
}

json to_json(const ComparisonReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"constraint", r.constraint.code()},
                 {"model", std::string(to_string(r.model))},
                 {"objective", std::string(to_string(r.objective))},
                 {"ok", r.ok}};
        if (r.ok) {
            json weights = json::object();
            for (std::size_t i = 0; i < report.tickers.size(); ++i) {
                weights[report.tickers[i]] = r.weights(static_cast<Eigen::Index>(i));
            }
            row["weights"] = weights;
            row["return"] = num(r.stats.ret);
            row["stdev"] = num(r.stats.stdev);
            row["sharpe"] = num(r.stats.sharpe);
            row["kkt_residual"] = num(r.kkt_residual);
            row["converged"] = r.converged;
            row["regularization_applied"] = r.regularization_applied;
        } else {
            row["error"] = r.error;
        }
        rows.push_back(std::move(row));
    }
    return json{{"tickers", report.tickers},
                {"rf", report.rf},
                {"estimator_counts", {{"MM", report.mm_estimators}, {"IM", report.im_estimators}}},
                {"rows", rows}};
}

void write_points_csv(std::ostream& out, const std::vector<RiskReturn>& points) {
    out << "stdev,return\n";
    for (const auto& p : points) out << format_number(p.stdev) << ',' << format_number(p.ret) << '\n';
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
    out << "constraint,model,objective";
    for (const auto& t : report.tickers) out << ',' << csv_escape(t);
    out << ",Return,StDev,Sharpe,kkt_residual,converged,status\n";
    for (const auto& r : report.rows) {
        out << r.constraint.code() << ',' << to_string(r.model) << ',' << to_string(r.objective);
        if (r.ok) {
            for (Eigen::Index i = 0; i < r.weights.size(); ++i) out << ',' << format_number(r.weights(i));
            out << ',' << format_number(r.stats.ret) << ',' << format_number(r.stats.stdev) << ','
                << format_number(r.stats.sharpe) << ',' << format_number(r.kkt_residual) << ','
                << (r.converged ? "true" : "false") << ",ok\n";
        } else {
            for (std::size_t i = 0; i < report.tickers.size() + 5; ++i) out << ',';
            out << csv_escape("failed: " + r.error) << '\n';
        }
    }
}

Objective parse_objective(std::string_view text) {
    const auto s = lower(trim(text));
    if (s == "min_variance" || s == "minvar" || s == "minimum variance") return Objective::min_variance;
    if (s == "max_sharpe" || s == "maxsharpe" || s == "max sharpe") return Objective::max_sharpe;
    if (s == "target_return") return Objective::target_return;
    throw ConfigurationError(fmt::format("unknown objective '{}'", text));
}

Model parse_model(std::string_view text) {
    const auto s = lower(trim(text));
    if (s == "mm") return Model::MM;
    if (s == "im") return Model::IM;
    throw ConfigurationError(fmt::format("unknown model '{}'", text));
}

std::vector<ExpectedRow> parse_expected_table(std::string_view csv, const std::string& source) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < csv.size()) {
        auto nl = csv.find('\n', start);
        if (nl == std::string_view::npos) nl = csv.size();
        lines.push_back(csv.substr(start, nl - start));
        start = nl + 1;
    }
    std::vector<ExpectedRow> rows;
    std::vector<std::string_view> header;
    std::size_t row_no = 0;
    for (auto line : lines) {
        ++row_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto fields = split(line);
        if (header.empty()) {
            header = fields;
            for (const char* key : {"constraint", "model", "objective"}) {
                if (std::find(header.begin(), header.end(), key) == header.end()) {
                    throw ParseError(source, row_no, 1, fmt::format("reference table lacks a '{}' column", key));
                }
            }
            continue;
        }
        if (fields.size() != header.size()) {
            throw ParseError(source, row_no, std::min(fields.size(), header.size()) + 1,
                             fmt::format("expected {} fields, found {}", header.size(), fields.size()));
        }
        ExpectedRow r;
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto key = header[c];
            const auto val = fields[c];
            auto number = [&]() -> std::optional<double> {
                if (val.empty()) return std::nullopt;
                const auto v = to_double(val);
                if (!v) throw ParseError(source, row_no, c + 1, fmt::format("non-numeric value '{}'", val));
                return v;
            };
            if (key == "table") r.table = val;
            else if (key == "constraint") r.constraint = lower(val);
            else if (key == "model") r.model = std::string(val);
            else if (key == "objective") r.objective = std::string(val);
            else if (key == "Return") r.ret = number();
            else if (key == "StDev") r.stdev = number();
            else if (key == "Sharpe") r.sharpe = number();
            else if (const auto v = number()) r.weights.emplace_back(std::string(key), *v);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<CellDelta> diff_against_expected(const ComparisonReport& report, const std::vector<ExpectedRow>& expected) {
    std::vector<CellDelta> out;
    for (const auto& row : report.rows) {
        if (!row.ok) continue;
        const auto it = std::find_if(expected.begin(), expected.end(), [&](const ExpectedRow& e) {
            if (e.constraint != row.constraint.code()) return false;
            try {
                return parse_model(e.model) == row.model && parse_objective(e.objective) == row.objective;
            } catch (const ConfigurationError&) {
                return false;
            }
        });
        if (it == expected.end()) continue;
        CellDelta d;
        d.constraint = row.constraint.code();
        d.model = std::string(to_string(row.model));
        d.objective = std::string(to_string(row.objective));
        d.expected_table = it->table;
        for (const auto& [ticker, value] : it->weights) {
            const auto pos = std::find(report.tickers.begin(), report.tickers.end(), ticker);
            if (pos == report.tickers.end()) continue;
            d.weight_delta[ticker] = row.weights(pos - report.tickers.begin()) - value;
        }
        if (it->ret) d.ret_delta = row.stats.ret - *it->ret;
        if (it->stdev) d.stdev_delta = row.stats.stdev - *it->stdev;
        if (it->sharpe) d.sharpe_delta = row.stats.sharpe - *it->sharpe;
        out.push_back(std::move(d));
    }
    return out;
}

void write_deltas_csv(std::ostream& out, const std::vector<CellDelta>& deltas, const std::vector<std::string>& tickers) {
    out << "constraint,model,objective,expected_table";
    for (const auto& t : tickers) out << ',' << csv_escape(t);
    out << ",Return,StDev,Sharpe\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& d : deltas) {
        out << d.constraint << ',' << d.model << ',' << d.objective << ',' << csv_escape(d.expected_table);
        for (const auto& t : tickers) {
            const auto it = d.weight_delta.find(t);
            out << ',' << (it == d.weight_delta.end() ? std::string() : format_number(it->second));
        }
        out << ',' << opt(d.ret_delta) << ',' << opt(d.stdev_delta) << ',' << opt(d.sharpe_delta) << '\n';
    }
}

}  // namespace mvindex
