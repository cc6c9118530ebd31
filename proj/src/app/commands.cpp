#include "commands.hpp"

#include "outputs.hpp"
#include "run_config.hpp"
#include "svg.hpp"

#include "mvindex/data_ingest.hpp"
#include "mvindex/errors.hpp"
#include "mvindex/estimation.hpp"
#include "mvindex/frontier.hpp"
#include "mvindex/numfmt.hpp"
#include "mvindex/optimizer.hpp"
#include "mvindex/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

namespace mvindex::app {

namespace {

using nlohmann::json;

/// Flags exactly as given on the command line; unset ones leave the
/// config-file or default value in place.
struct Flags {
    std::string config;
    std::string prices, riskfree, market, model, objective, constraint, denominator, regression, out, expected;
    std::optional<double> rf;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> formats;
    std::optional<int> grid, cloud;
    std::optional<double> leverage, box;
    bool forward_fill = false, allow_gaps = false, include_inefficient = false;
};

RunConfig build_config(const Flags& f) {
    RunConfig c;
    if (const char* env = std::getenv("MVINDEX_OUTPUT_DIR"); env && *env) c.output_dir = env;
    if (!f.config.empty()) apply_config_file(c, f.config);
    if (!f.prices.empty()) c.prices_path = f.prices;
    if (!f.riskfree.empty()) c.riskfree_path = f.riskfree;
    if (!f.market.empty()) c.market_ticker = f.market;
    if (!f.model.empty()) c.model = f.model;
    if (!f.objective.empty()) c.objective = f.objective;
    if (!f.constraint.empty()) c.constraint = f.constraint;
    if (!f.denominator.empty()) c.denominator = parse_denominator(f.denominator);
    if (!f.regression.empty()) c.regression = parse_regression(f.regression);
    if (!f.out.empty()) c.output_dir = f.out;
    if (!f.expected.empty()) c.expected_dir = std::filesystem::path(f.expected);
    if (f.rf) c.rf_override = f.rf;
    if (f.seed) c.seed = *f.seed;
    if (!f.formats.empty()) c.formats = f.formats;
    if (f.grid) c.grid = *f.grid;
    if (f.cloud) c.cloud = *f.cloud;
    if (f.leverage) c.leverage_limit = *f.leverage;
    if (f.box) c.box_bound = *f.box;
    c.forward_fill = c.forward_fill || f.forward_fill;
    c.allow_gaps = c.allow_gaps || f.allow_gaps;
    c.include_inefficient = c.include_inefficient || f.include_inefficient;
    return c;
}

struct Inputs {
    MonthlyReturnTable table;
    double rf = 0.0;
    json input_record;
};

Inputs load_inputs(const RunConfig& config, std::ostream& err) {
    Inputs in;
    const auto price_text = read_text_file(config.prices_path);
    ParseOptions po;
    po.source = config.prices_path.string();
    po.forward_fill = config.forward_fill;
    const auto daily = parse_price_table(price_text, config.market_ticker, po);
    ReturnOptions ro;
    ro.allow_gaps = config.allow_gaps;
    in.table = compute_monthly_returns(select_bom(daily), ro);
    in.input_record["prices"] = {{"file", config.prices_path.filename().string()},
                                 {"sha256", sha256_hex(price_text)}};

    const bool have_riskfree = !config.riskfree_path.empty() && std::filesystem::is_regular_file(config.riskfree_path);
    if (have_riskfree) {
        const auto rf_text = read_text_file(config.riskfree_path);
        in.input_record["riskfree"] = {{"file", config.riskfree_path.filename().string()},
                                       {"sha256", sha256_hex(rf_text)}};
        if (!config.rf_override) {
            const auto series = parse_risk_free(rf_text, config.riskfree_path.string());
            for (const auto& w : series.warnings) err << "warning: " << w << '\n';
            in.rf = average_risk_free(series);
        }
    }
    if (config.rf_override) in.rf = *config.rf_override;
    if (in.table.has_gaps()) err << "warning: monthly series has gaps; affected rows are flagged\n";
    return in;
}

struct ModelInputs {
    Model model;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct Estimates {
    MarkowitzEstimates mm;
    IndexModelEstimates im;

    ModelInputs inputs(Model m) const {
        if (m == Model::MM) return {m, mm.mean, mm.cov};
        return {m, im.expected_returns(), im_covariance(im)};
    }
};

Estimates estimate(const Inputs& in, const RunConfig& config) {
    Estimates e;
    e.mm = markowitz_estimates(in.table, config.denominator);
    IndexModelOptions opts;
    opts.mode = config.regression;
    opts.rf = in.rf;
    opts.denominator = config.denominator;
    e.im = index_model_estimates(in.table, opts);
    return e;
}

ConstraintSet constraint_of(const RunConfig& config, const MonthlyReturnTable& table, const std::string& code) {
    auto c = ConstraintSet::parse(code, table.market_index);
    c.leverage_limit = config.leverage_limit;
    c.box_bound = config.box_bound;
    return c;
}

std::vector<Objective> objectives_of(const RunConfig& config) {
    if (config.objective == "minvar") return {Objective::min_variance};
    if (config.objective == "maxsharpe") return {Objective::max_sharpe};
    return {Objective::min_variance, Objective::max_sharpe};
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

std::string objective_tag(Objective o) { return o == Objective::min_variance ? "minvar" : "maxsharpe"; }

json manifest(const std::string& command, const RunConfig& config, const Inputs& in, const OutputWriter& out) {
    const long n = static_cast<long>(in.table.assets());
    return json{{"tool", "mvindex"},
                {"version", MVINDEX_VERSION},
                {"command", command},
                {"config", config.to_json()},
                {"inputs", in.input_record},
                {"sample",
                 {{"periods", in.table.periods()},
                  {"assets", in.table.assets()},
                  {"tickers", in.table.tickers},
                  {"market", in.table.tickers.at(in.table.market_index)},
                  {"first_month", in.table.months.front().to_string()},
                  {"last_month", in.table.months.back().to_string()}}},
                {"rf", in.rf},
                {"estimator_counts", {{"MM", estimator_count(Model::MM, n)}, {"IM", estimator_count(Model::IM, n)}}},
                {"outputs", out.manifest_entries()}};
}

void write_manifest(OutputWriter& writer, const std::string& command, const RunConfig& config, const Inputs& in) {
    const auto m = manifest(command, config, in, writer);
    writer.write("manifest.json", m.dump(2) + "\n");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int exit_code_for(const Error& e) {
    if (dynamic_cast<const NonConvergenceError*>(&e) || dynamic_cast<const NumericalError*>(&e) ||
        dynamic_cast<const SingularityError*>(&e)) {
        return exit_nonconvergence;
    }
    if (dynamic_cast<const InfeasibleError*>(&e) || dynamic_cast<const UnboundedError*>(&e)) return exit_infeasible;
    return exit_input;
}

std::string error_kind(const Error& e) {
    if (dynamic_cast<const NonConvergenceError*>(&e)) return "non_convergence";
    if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
    if (dynamic_cast<const SingularityError*>(&e)) return "singular";
    if (dynamic_cast<const InfeasibleError*>(&e)) return "infeasible";
    if (dynamic_cast<const UnboundedError*>(&e)) return "unbounded";
    return "input";
}

// ---------------------------------------------------------------- ingest

int cmd_ingest(const RunConfig& config, std::ostream& out, std::ostream& err) {
    validate(config, true);
    const auto in = load_inputs(config, err);
    OutputWriter writer(config.output_dir);
    std::ostringstream csv;
    write_monthly_returns_csv(csv, in.table);
    writer.write("monthly_returns.csv", csv.str());
    write_manifest(writer, "ingest", config, in);

    out << "periods (T): " << in.table.periods() << '\n'
        << "assets (N): " << in.table.assets() << '\n'
        << "market: " << in.table.tickers.at(in.table.market_index) << '\n'
        << "months: " << in.table.months.front().to_string() << " .. " << in.table.months.back().to_string() << '\n'
        << "average monthly risk-free rate: " << format_number(in.rf)
        << (config.rf_override ? " (override)" : "") << '\n'
        << "wrote " << (config.output_dir / "monthly_returns.csv").string() << '\n';
    return exit_ok;
}

// ----------------------------------------------------------------- solve

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
    validate(config, true);
    const auto in = load_inputs(config, err);
    const auto est = estimate(in, config);
    const auto c = constraint_of(config, in.table, config.constraint);
    OutputWriter writer(config.output_dir);
    const auto& tickers = in.table.tickers;

    if (config.wants("json")) {
        for (const auto m : config.models()) {
            const auto j = m == Model::MM ? to_json(est.mm) : to_json(est.im);
            writer.write(fmt::format("estimates_{}.json", lower(to_string(m))), dump(j));
        }
    }

    int code = exit_ok;
    json diagnostics = json::array();
    ComparisonReport summary;
    summary.tickers = tickers;
    summary.rf = in.rf;
    for (const auto m : config.models()) {
        const auto mi = est.inputs(m);
        for (const auto o : objectives_of(config)) {
            const auto tag = fmt::format("{} {} {}", to_string(m), to_string(o), c.code());
            ComparisonRow row;
            row.constraint = c;
            row.model = m;
            row.objective = o;
            try {
                auto sol = o == Objective::min_variance ? solve_min_variance(mi.cov, mi.mean, in.rf, c)
                                                        : solve_max_sharpe(mi.cov, mi.mean, in.rf, c);
                sol.stats.model = m;
                writer.write(fmt::format("solution_{}_{}_{}.json", lower(to_string(m)), objective_tag(o), c.code()),
                             dump(to_json(sol, tickers)));
                row.ok = true;
                row.weights = sol.weights;
                row.stats = sol.stats;
                row.kkt_residual = sol.kkt_residual;
                row.converged = sol.converged;
                row.regularization_applied = sol.regularization_applied;
                out << fmt::format("{}: return={} stdev={} sharpe={} kkt={}{}\n", tag, format_number(sol.stats.ret),
                                   format_number(sol.stats.stdev), format_number(sol.stats.sharpe),
                                   format_number(sol.kkt_residual), sol.converged ? "" : " NOT CONVERGED");
                if (!sol.converged) {
                    code = std::max(code, static_cast<int>(exit_nonconvergence));
                    diagnostics.push_back({{"model", std::string(to_string(m))},
                                           {"objective", std::string(to_string(o))},
                                           {"constraint", c.code()},
                                           {"error", "non_convergence"},
                                           {"message", "solution misses the KKT or feasibility tolerance"},
                                           {"iterations", sol.iterations},
                                           {"kkt_residual", sol.kkt_residual}});
                }
            } catch (const Error& e) {
                row.error = e.what();
                err << tag << ": " << e.what() << '\n';
                code = std::max(code, exit_code_for(e));
                json d{{"model", std::string(to_string(m))},
                       {"objective", std::string(to_string(o))},
                       {"constraint", c.code()},
                       {"error", error_kind(e)},
                       {"message", e.what()}};
                if (const auto* nc = dynamic_cast<const NonConvergenceError*>(&e)) {
                    d["iterations"] = nc->iterations();
                    d["residual"] = nc->residual();
                }
                diagnostics.push_back(std::move(d));
            }
            summary.rows.push_back(std::move(row));
        }
    }
    if (config.wants("csv")) {
        std::ostringstream csv;
        write_comparison_csv(csv, summary);
        writer.write(fmt::format("solutions_{}.csv", c.code()), csv.str());
    }
    if (!diagnostics.empty()) writer.write("diagnostics.json", dump(json{{"failures", diagnostics}}));
    write_manifest(writer, "solve", config, in);
    return code;
}

// -------------------------------------------------------------- frontier

const char* model_color(Model m) { return m == Model::MM ? "#1f5fa8" : "#c2410c"; }

json points_json(const std::vector<RiskReturn>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back({{"stdev", p.stdev}, {"return", p.ret}});
    return a;
}

std::string points_csv(const std::vector<RiskReturn>& pts) {
    std::ostringstream s;
    write_points_csv(s, pts);
    return s.str();
}

int cmd_frontier(const RunConfig& config, std::ostream& out, std::ostream& err) {
    validate(config, true);
    const auto in = load_inputs(config, err);
    const auto est = estimate(in, config);
    const auto c = constraint_of(config, in.table, config.constraint);
    OutputWriter writer(config.output_dir);
    const auto n = static_cast<int>(in.table.assets());

    std::optional<CloudSample> cloud;
    if (config.cloud > 0) cloud = sample_cloud(c, n, config.cloud, config.seed);

    std::vector<PlotSeries> lines, clouds, marks;
    json models = json::array();
    for (const auto m : config.models()) {
        const auto mi = est.inputs(m);
        const auto tag = lower(to_string(m));
        FrontierOptions fo;
        fo.model = m;
        fo.include_inefficient = config.include_inefficient;
        const auto curve = trace_frontier(mi.cov, mi.mean, in.rf, c, config.grid, fo);

        double sigma_max = 0.0;
        for (const auto& p : curve.points) sigma_max = std::max(sigma_max, p.stdev);
        std::vector<RiskReturn> cal;
        if (curve.tangency) {
            sigma_max = std::max(sigma_max, 1.2 * curve.tangency->stats.stdev);
            cal = capital_allocation_line(in.rf, curve.tangency->stats, sigma_max, config.grid);
        } else {
            err << fmt::format("{} {}: no capital allocation line: {}\n", to_string(m), c.code(), curve.tangency_error);
        }
        std::vector<RiskReturn> cloud_pts;
        if (cloud) cloud_pts = cloud_points(*cloud, mi.mean, mi.cov);

        if (config.wants("csv")) {
            writer.write(fmt::format("frontier_{}_{}.csv", tag, c.code()), points_csv(curve.points));
            if (!cal.empty()) writer.write(fmt::format("cal_{}_{}.csv", tag, c.code()), points_csv(cal));
            if (cloud) writer.write(fmt::format("cloud_{}_{}.csv", tag, c.code()), points_csv(cloud_pts));
        }
        json mj{{"model", std::string(to_string(m))},
                {"min_variance", to_json(curve.min_variance, in.table.tickers)},
                {"tangency", curve.tangency ? to_json(*curve.tangency, in.table.tickers) : json(nullptr)},
                {"frontier", points_json(curve.points)},
                {"cal", points_json(cal)}};
        if (!curve.tangency) mj["tangency_error"] = curve.tangency_error;
        models.push_back(std::move(mj));

        const std::string name(to_string(m));
        lines.push_back({name + " frontier", "frontier", model_color(m), PlotSeries::Kind::line, false, true,
                         curve.points});
        if (!cal.empty()) {
            lines.push_back({name + " CAL", "cal", model_color(m), PlotSeries::Kind::line, true, true, cal});
        }
        if (cloud) {
            clouds.push_back({name + " random portfolios", "cloud", model_color(m), PlotSeries::Kind::scatter, false,
                              false, cloud_pts});
        }
        std::vector<RiskReturn> key{{curve.min_variance.stats.stdev, curve.min_variance.stats.ret}};
        if (curve.tangency) key.push_back({curve.tangency->stats.stdev, curve.tangency->stats.ret});
        marks.push_back({name + " min-var / tangency", "portfolio", model_color(m), PlotSeries::Kind::scatter, false,
                         true, key});

        out << fmt::format("{} {}: {} frontier points, min-var stdev={} return={}", name, c.code(),
                           curve.points.size(), format_number(curve.min_variance.stats.stdev),
                           format_number(curve.min_variance.stats.ret));
        if (curve.tangency) out << fmt::format(", max Sharpe={}", format_number(curve.tangency->stats.sharpe));
        out << '\n';
    }
    if (config.wants("json")) {
        json j{{"constraint", c.code()}, {"rf", in.rf}, {"seed", config.seed}, {"models", models}};
        writer.write(fmt::format("frontier_{}.json", c.code()), dump(j));
    }
    if (config.wants("svg")) {
        std::vector<PlotSeries> all = clouds;
        all.insert(all.end(), lines.begin(), lines.end());
        all.insert(all.end(), marks.begin(), marks.end());
        writer.write(fmt::format("frontier_{}.svg", c.code()),
                     render_svg(fmt::format("Efficient frontier and CAL, {}", c.description()), all));
    }
    write_manifest(writer, "frontier", config, in);
    return exit_ok;
}

// --------------------------------------------------------------- compare

int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err) {
    validate(config, true);
    const auto in = load_inputs(config, err);
    const auto est = estimate(in, config);
    std::vector<ConstraintSet> constraints;
    for (const char* code : {"c1", "c2", "c3", "c4", "c5"}) constraints.push_back(constraint_of(config, in.table, code));
    const auto report = compare_models(est.mm, est.im, in.rf, constraints);
    OutputWriter writer(config.output_dir);

    std::optional<std::vector<CellDelta>> deltas;
    if (config.expected_dir) {
        const auto path = *config.expected_dir / "comparison.csv";
        const auto expected = parse_expected_table(read_text_file(path), path.string());
        deltas = diff_against_expected(report, expected);
    }

    if (config.wants("csv")) {
        std::ostringstream csv;
        write_comparison_csv(csv, report);
        writer.write("comparison.csv", csv.str());
        if (deltas) {
            std::ostringstream d;
            write_deltas_csv(d, *deltas, report.tickers);
            writer.write("comparison_deltas.csv", d.str());
        }
    }
    if (config.wants("json")) {
        auto j = to_json(report);
        if (deltas) {
            json dj = json::array();
            for (const auto& d : *deltas) {
                json row{{"constraint", d.constraint},
                         {"model", d.model},
                         {"objective", d.objective},
                         {"expected_table", d.expected_table},
                         {"weights", d.weight_delta}};
                if (d.ret_delta) row["return"] = *d.ret_delta;
                if (d.stdev_delta) row["stdev"] = *d.stdev_delta;
                if (d.sharpe_delta) row["sharpe"] = *d.sharpe_delta;
                dj.push_back(std::move(row));
            }
            j["deltas"] = dj;
        }
        writer.write("comparison.json", dump(j));
    }
    if (config.wants("svg")) {
        std::vector<PlotSeries> series;
        for (const auto m : {Model::MM, Model::IM}) {
            for (const auto o : {Objective::min_variance, Objective::max_sharpe}) {
                PlotSeries s{fmt::format("{} {}", to_string(m), to_string(o)), "portfolio", model_color(m),
                             PlotSeries::Kind::scatter, false, true, {}};
                if (o == Objective::max_sharpe) s.color = m == Model::MM ? "#60a5fa" : "#fb923c";
                for (const auto& r : report.rows) {
                    if (r.ok && r.model == m && r.objective == o) s.points.push_back({r.stats.stdev, r.stats.ret});
                }
                series.push_back(std::move(s));
            }
        }
        writer.write("comparison.svg", render_svg("Optimal portfolios across constraints C1-C5", series));
    }
    write_manifest(writer, "compare", config, in);

    int failed = 0;
    for (const auto& r : report.rows) {
        if (!r.ok) {
            ++failed;
            err << fmt::format("{} {} {}: {}\n", r.constraint.code(), to_string(r.model), to_string(r.objective),
                               r.error);
        }
    }
    out << fmt::format("{} cells, {} failed; estimators MM={} IM={}\n", report.rows.size(), failed,
                       report.mm_estimators, report.im_estimators);
    if (deltas) out << fmt::format("{} cells matched the expected table\n", deltas->size());
    return exit_ok;
}

void add_common_options(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "JSON config file; flags override its values");
    cmd.add_option("--prices", f.prices, "Daily price CSV (date,<tickers>...)");
    cmd.add_option("--riskfree", f.riskfree, "Risk-free CSV (month,annual_rate)");
    cmd.add_option("--market", f.market, "Ticker of the market index column (default KLCI)");
    cmd.add_option("--rf", f.rf, "Monthly risk-free rate; overrides the risk-free file");
    cmd.add_option("--denominator", f.denominator, "Covariance denominator: sample | population");
    cmd.add_option("--regression", f.regression, "Index-model regression: raw | excess");
    cmd.add_option("--out", f.out, "Output directory (default $MVINDEX_OUTPUT_DIR or ./mvindex-out)");
    cmd.add_option("--format", f.formats, "Comma-separated subset of csv,json,svg")->delimiter(',');
    cmd.add_flag("--forward-fill", f.forward_fill, "Fill empty price cells from the previous day");
    cmd.add_flag("--allow-gaps", f.allow_gaps, "Accept missing calendar months");
}

void add_model_options(CLI::App& cmd, Flags& f) {
    cmd.add_option("--model", f.model, "mm | im | both");
    cmd.add_option("--leverage", f.leverage, "C1 gross exposure limit (default 2)");
    cmd.add_option("--box", f.box, "C2 per-asset bound (default 1)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-variance portfolios under the Markowitz and single-index models", "mvindex"};
    app.set_version_flag("--version", std::string(MVINDEX_VERSION));
    app.require_subcommand(1);

    Flags f;
    auto* ingest = app.add_subcommand("ingest", "Aggregate daily prices to monthly returns");
    add_common_options(*ingest, f);

    auto* solve = app.add_subcommand("solve", "Minimum-variance and maximum-Sharpe portfolios");
    add_common_options(*solve, f);
    add_model_options(*solve, f);
    solve->add_option("--objective", f.objective, "minvar | maxsharpe | both");
    solve->add_option("--constraint", f.constraint, "c1 | c2 | c3 | c4 | c5");

    auto* frontier = app.add_subcommand("frontier", "Efficient frontiers, CALs and random portfolio clouds");
    add_common_options(*frontier, f);
    add_model_options(*frontier, f);
    frontier->add_option("--constraint", f.constraint, "c1 | c2 | c3 | c4 | c5");
    frontier->add_option("--grid", f.grid, "Frontier target count (default 100)");
    frontier->add_option("--cloud", f.cloud, "Random portfolios to sample (default 1000)");
    frontier->add_option("--seed", f.seed, "Seed of the random portfolio cloud (default 42)");
    frontier->add_flag("--include-inefficient", f.include_inefficient, "Also trace the lower branch");

    auto* compare = app.add_subcommand("compare", "Both models, both objectives, all five constraints");
    add_common_options(*compare, f);
    compare->add_option("--leverage", f.leverage, "C1 gross exposure limit (default 2)");
    compare->add_option("--box", f.box, "C2 per-asset bound (default 1)");
    compare->add_option("--expected", f.expected, "Directory holding a reference comparison.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_ok : exit_input;
    }

    try {
        const auto config = build_config(f);
        if (ingest->parsed()) return cmd_ingest(config, out, err);
        if (solve->parsed()) return cmd_solve(config, out, err);
        if (frontier->parsed()) return cmd_frontier(config, out, err);
        return cmd_compare(config, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input;
    }
}

}  // namespace mvindex::app
