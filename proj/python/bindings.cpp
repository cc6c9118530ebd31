#include "mvindex/data_ingest.hpp"
#include "mvindex/errors.hpp"
#include "mvindex/estimation.hpp"
#include "mvindex/frontier.hpp"
#include "mvindex/optimizer.hpp"
#include "mvindex/report.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace mvindex;

namespace {

Eigen::MatrixXd points_matrix(const std::vector<RiskReturn>& points) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = points[i].stdev;
        m(static_cast<Eigen::Index>(i), 1) = points[i].ret;
    }
    return m;
}

std::vector<std::string> month_labels(const MonthlyReturnTable& t) {
    std::vector<std::string> out;
    out.reserve(t.months.size());
    for (const auto& m : t.months) out.push_back(m.to_string());
    return out;
}

ConstraintSet constraint_arg(const py::object& obj, std::size_t market_index) {
    if (py::isinstance<ConstraintSet>(obj)) return obj.cast<ConstraintSet>();
    return ConstraintSet::parse(obj.cast<std::string>(), market_index);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mean-variance portfolio selection under the Markowitz and single-index models";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ConfigurationError>(m, "ConfigurationError", base.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<UnboundedError>(m, "UnboundedError", base.ptr());
    py::register_exception<NonConvergenceError>(m, "NonConvergenceError", base.ptr());
    py::register_exception<SamplingError>(m, "SamplingError", base.ptr());

    py::enum_<Model>(m, "Model").value("MM", Model::MM).value("IM", Model::IM);
    py::enum_<Objective>(m, "Objective")
        .value("min_variance", Objective::min_variance)
        .value("max_sharpe", Objective::max_sharpe)
        .value("target_return", Objective::target_return);
    py::enum_<Regime>(m, "Regime")
        .value("C1_leverage", Regime::C1_leverage)
        .value("C2_box", Regime::C2_box)
        .value("C3_free", Regime::C3_free)
        .value("C4_long_only", Regime::C4_long_only)
        .value("C5_no_market", Regime::C5_no_market);

    py::class_<ConstraintSet>(m, "ConstraintSet")
        .def(py::init([](const std::string& code, std::size_t market_index, double leverage_limit, double box_bound) {
                 auto c = ConstraintSet::parse(code, market_index);
                 c.leverage_limit = leverage_limit;
                 c.box_bound = box_bound;
                 return c;
             }),
             py::arg("code"), py::arg("market_index") = 0, py::arg("leverage_limit") = 2.0, py::arg("box_bound") = 1.0)
        .def_readwrite("regime", &ConstraintSet::regime)
        .def_readwrite("market_index", &ConstraintSet::market_index)
        .def_readwrite("leverage_limit", &ConstraintSet::leverage_limit)
        .def_readwrite("box_bound", &ConstraintSet::box_bound)
        .def_property_readonly("code", &ConstraintSet::code)
        .def_property_readonly("description", &ConstraintSet::description)
        .def_static("all", &ConstraintSet::all, py::arg("market_index"))
        .def("__repr__", [](const ConstraintSet& c) { return "ConstraintSet('" + c.code() + "')"; });

    py::class_<MonthlyReturnTable>(m, "MonthlyReturnTable")
        .def_readonly("returns", &MonthlyReturnTable::returns)
        .def_readonly("tickers", &MonthlyReturnTable::tickers)
        .def_readonly("market_index", &MonthlyReturnTable::market_index)
        .def_property_readonly("months", &month_labels)
        .def_property_readonly("periods", &MonthlyReturnTable::periods)
        .def_property_readonly("assets", &MonthlyReturnTable::assets)
        .def_static("from_matrix", &MonthlyReturnTable::from_matrix, py::arg("returns"), py::arg("market_index"),
                    py::arg("tickers") = std::vector<std::string>{});

    m.def(
        "load_returns",
        [](const std::filesystem::path& prices, const std::string& market, bool forward_fill, bool allow_gaps) {
            ReturnOptions opts;
            opts.allow_gaps = allow_gaps;
            return compute_monthly_returns(select_bom(read_price_file(prices, market, forward_fill)), opts);
        },
        py::arg("prices"), py::arg("market") = "KLCI", py::arg("forward_fill") = false, py::arg("allow_gaps") = false,
        "Daily price CSV to beginning-of-month simple returns.");
    m.def(
        "average_risk_free",
        [](const std::filesystem::path& path) { return average_risk_free(read_risk_free_file(path)); },
        py::arg("path"), "Mean monthly risk-free rate of a month,annual_rate CSV.");
    m.def("annual_to_monthly_rate", &annual_to_monthly_rate, py::arg("annual"));

    py::class_<MarkowitzEstimates>(m, "MarkowitzEstimates")
        .def_readonly("tickers", &MarkowitzEstimates::tickers)
        .def_readonly("mean", &MarkowitzEstimates::mean)
        .def_readonly("cov", &MarkowitzEstimates::cov)
        .def_readonly("corr", &MarkowitzEstimates::corr)
        .def_readonly("sample_size", &MarkowitzEstimates::sample_size)
        .def("to_json", [](const MarkowitzEstimates& e) { return to_json(e).dump(); });

    py::class_<IndexModelEstimates>(m, "IndexModelEstimates")
        .def_readonly("tickers", &IndexModelEstimates::tickers)
        .def_readonly("market_index", &IndexModelEstimates::market_index)
        .def_readonly("alpha", &IndexModelEstimates::alpha)
        .def_readonly("beta", &IndexModelEstimates::beta)
        .def_readonly("resid_var", &IndexModelEstimates::resid_var)
        .def_readonly("market_mean", &IndexModelEstimates::market_mean)
        .def_readonly("market_var", &IndexModelEstimates::market_var)
        .def_readonly("sample_size", &IndexModelEstimates::sample_size)
        .def("expected_returns", &IndexModelEstimates::expected_returns)
        .def("covariance", [](const IndexModelEstimates& e) { return im_covariance(e); })
        .def("to_json", [](const IndexModelEstimates& e) { return to_json(e).dump(); });

    m.def(
        "markowitz_estimates",
        [](const MonthlyReturnTable& t, bool population) {
            return markowitz_estimates(t, population ? CovarianceDenominator::population
                                                     : CovarianceDenominator::sample);
        },
        py::arg("table"), py::arg("population") = false);
    m.def(
        "index_model_estimates",
        [](const MonthlyReturnTable& t, bool excess, double rf, bool population) {
            IndexModelOptions opts;
            opts.mode = excess ? RegressionMode::excess : RegressionMode::raw;
            opts.rf = rf;
            opts.denominator = population ? CovarianceDenominator::population : CovarianceDenominator::sample;
            return index_model_estimates(t, opts);
        },
        py::arg("table"), py::arg("excess") = false, py::arg("rf") = 0.0, py::arg("population") = false);
    m.def("estimator_count", &estimator_count, py::arg("model"), py::arg("n"));
    m.def("sharpe_ratio", &sharpe_ratio, py::arg("ret"), py::arg("stdev"), py::arg("rf"));

    py::class_<PortfolioStats>(m, "PortfolioStats")
        .def_readonly("ret", &PortfolioStats::ret)
        .def_readonly("stdev", &PortfolioStats::stdev)
        .def_readonly("sharpe", &PortfolioStats::sharpe)
        .def_readonly("model", &PortfolioStats::model);
    m.def("evaluate_portfolio", &evaluate_portfolio, py::arg("weights"), py::arg("mean"), py::arg("cov"), py::arg("rf"),
          py::arg("model") = Model::MM);

    py::class_<SolverOptions>(m, "SolverOptions")
        .def(py::init<>())
        .def_readwrite("max_iterations", &SolverOptions::max_iterations)
        .def_readwrite("kkt_tolerance", &SolverOptions::kkt_tolerance)
        .def_readwrite("feasibility_tolerance", &SolverOptions::feasibility_tolerance);

    py::class_<PortfolioSolution>(m, "PortfolioSolution")
        .def_readonly("weights", &PortfolioSolution::weights)
        .def_readonly("stats", &PortfolioSolution::stats)
        .def_property_readonly("ret", [](const PortfolioSolution& s) { return s.stats.ret; })
        .def_property_readonly("stdev", [](const PortfolioSolution& s) { return s.stats.stdev; })
        .def_property_readonly("sharpe", [](const PortfolioSolution& s) { return s.stats.sharpe; })
        .def_readonly("objective", &PortfolioSolution::objective)
        .def_readonly("constraint", &PortfolioSolution::constraint)
        .def_readonly("kkt_residual", &PortfolioSolution::kkt_residual)
        .def_readonly("iterations", &PortfolioSolution::iterations)
        .def_readonly("converged", &PortfolioSolution::converged)
        .def_readonly("regularization_applied", &PortfolioSolution::regularization_applied)
        .def("to_json", [](const PortfolioSolution& s, const std::vector<std::string>& tickers) {
            return to_json(s, tickers).dump();
        });

    m.def(
        "solve_min_variance",
        [](const Eigen::MatrixXd& cov, const py::object& constraint, std::optional<Eigen::VectorXd> mean, double rf,
           std::size_t market_index, const SolverOptions& opts) {
            const auto c = constraint_arg(constraint, market_index);
            return mean ? solve_min_variance(cov, *mean, rf, c, opts) : solve_min_variance(cov, c, opts);
        },
        py::arg("cov"), py::arg("constraint") = "c3", py::arg("mean") = py::none(), py::arg("rf") = 0.0,
        py::arg("market_index") = 0, py::arg("options") = SolverOptions{});
    m.def(
        "solve_max_sharpe",
        [](const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf, const py::object& constraint,
           std::size_t market_index, const SolverOptions& opts) {
            return solve_max_sharpe(cov, mean, rf, constraint_arg(constraint, market_index), opts);
        },
        py::arg("cov"), py::arg("mean"), py::arg("rf"), py::arg("constraint") = "c3", py::arg("market_index") = 0,
        py::arg("options") = SolverOptions{});
    m.def(
        "solve_target_return",
        [](const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double target, const py::object& constraint,
           std::size_t market_index, const SolverOptions& opts) {
            return solve_target_return(cov, mean, target, constraint_arg(constraint, market_index), opts);
        },
        py::arg("cov"), py::arg("mean"), py::arg("target"), py::arg("constraint") = "c3", py::arg("market_index") = 0,
        py::arg("options") = SolverOptions{});
    m.def("closed_form_min_variance", &closed_form_min_variance, py::arg("cov"));
    m.def("closed_form_tangency", &closed_form_tangency, py::arg("cov"), py::arg("mean"), py::arg("rf"));
    m.def(
        "check_feasible",
        [](const Eigen::VectorXd& w, const py::object& constraint, double tol, std::size_t market_index) {
            const auto r = check_feasible(w, constraint_arg(constraint, market_index), tol);
            std::vector<std::pair<std::string, double>> v;
            for (const auto& x : r.violations) v.emplace_back(x.constraint, x.magnitude);
            return py::make_tuple(r.feasible, v);
        },
        py::arg("weights"), py::arg("constraint"), py::arg("tol") = 1e-7, py::arg("market_index") = 0,
        "Returns (feasible, [(constraint, magnitude), ...]).");

    py::class_<FrontierCurve>(m, "FrontierCurve")
        .def_property_readonly("points", [](const FrontierCurve& c) { return points_matrix(c.points); })
        .def_readonly("min_variance", &FrontierCurve::min_variance)
        .def_readonly("tangency", &FrontierCurve::tangency)
        .def_readonly("tangency_error", &FrontierCurve::tangency_error)
        .def_readonly("model", &FrontierCurve::model)
        .def_readonly("rf", &FrontierCurve::rf);
    m.def(
        "trace_frontier",
        [](const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf, const py::object& constraint, int grid,
           Model model, bool include_inefficient, std::size_t market_index) {
            FrontierOptions opts;
            opts.model = model;
            opts.include_inefficient = include_inefficient;
            return trace_frontier(cov, mean, rf, constraint_arg(constraint, market_index), grid, opts);
        },
        py::arg("cov"), py::arg("mean"), py::arg("rf"), py::arg("constraint") = "c3", py::arg("grid") = 100,
        py::arg("model") = Model::MM, py::arg("include_inefficient") = false, py::arg("market_index") = 0,
        "Frontier as an (n, 2) array of (stdev, return) plus its anchor portfolios.");
    m.def(
        "capital_allocation_line",
        [](double rf, const PortfolioStats& tangency, double sigma_max, int grid) {
            return points_matrix(capital_allocation_line(rf, tangency, sigma_max, grid));
        },
        py::arg("rf"), py::arg("tangency"), py::arg("sigma_max"), py::arg("grid") = 50);
    m.def(
        "sample_cloud",
        [](const py::object& constraint, int n_assets, int count, std::uint64_t seed, std::size_t market_index) {
            const auto s = sample_cloud(constraint_arg(constraint, market_index), n_assets, count, seed);
            Eigen::MatrixXd w(static_cast<Eigen::Index>(s.weights.size()), n_assets);
            for (std::size_t i = 0; i < s.weights.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = s.weights[i];
            return w;
        },
        py::arg("constraint"), py::arg("n_assets"), py::arg("count"), py::arg("seed") = 42, py::arg("market_index") = 0,
        "Random feasible weights, one row per portfolio.");

    m.def(
        "compare_models",
        [](const MarkowitzEstimates& mm, const IndexModelEstimates& im, double rf) {
            return to_json(compare_models(mm, im, rf, ConstraintSet::all(im.market_index)))
                .dump();
        },
        py::arg("mm"), py::arg("im"), py::arg("rf"),
        "All five constraint regimes under both models, as a JSON document.");
}
