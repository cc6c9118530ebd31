#pragma once

// Efficient frontiers, capital allocation lines, random feasible portfolio
// clouds and the two-model comparison report.

#include "mvindex/estimation.hpp"
#include "mvindex/optimizer.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mvindex {

struct RiskReturn {
    double stdev = 0.0;
    double ret = 0.0;
};

struct FrontierCurve {
    /// Sorted by return. With `include_inefficient` the lower branch precedes
    /// the minimum-variance point.
    std::vector<RiskReturn> points;
    PortfolioSolution min_variance;
    /// Absent when the maximum Sharpe portfolio is undefined for the inputs.
    std::optional<PortfolioSolution> tangency;
    std::string tangency_error;
    ConstraintSet constraint;
    Model model = Model::MM;
    double rf = 0.0;
};

struct FrontierOptions {
    Model model = Model::MM;
    /// Also trace returns below the minimum-variance portfolio.
    bool include_inefficient = false;
    SolverOptions solver;
};

/// Minimum-variance portfolios at `grid` equally spaced targets between the
/// minimum-variance return and the highest attainable return. For regimes
/// with unbounded return (C3, C5) the upper end is the larger of the best
/// single-asset mean and the tangency return. The tangency point, when it
/// falls inside the traced range, is inserted as an extra point.
FrontierCurve trace_frontier(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                             const ConstraintSet& c, int grid, const FrontierOptions& options = {});

/// Linear interpolation of the frontier stdev at `ret` on the efficient
/// branch; nullopt outside the traced return range.
std::optional<double> frontier_stdev_at(const FrontierCurve& curve, double ret);

/// Points (s, rf + sharpe * s) for s in [0, sigma_max]; the tangency stdev is
/// included whenever it lies in that interval.
std::vector<RiskReturn> capital_allocation_line(double rf, const PortfolioStats& tangency, double sigma_max,
                                                int grid);

struct CloudSample {
    std::vector<Eigen::VectorXd> weights;
    ConstraintSet constraint;
    std::uint64_t seed = 0;
};

/// Random feasible portfolios, reproducible for a given seed.
///   C4: flat Dirichlet on the simplex.
///   C3, C5: standard normal draws normalized to sum 1 (C5 zeroes the market first).
///   C1, C2: rejection from the C3 generator; after 100 rejections the last
///           draw is shrunk toward equal weights until feasible.
CloudSample sample_cloud(const ConstraintSet& c, int n_assets, int count, std::uint64_t seed);

std::vector<RiskReturn> cloud_points(const CloudSample& sample, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& cov);

struct ComparisonRow {
    ConstraintSet constraint;
    Model model = Model::MM;
    Objective objective = Objective::min_variance;
    bool ok = false;
    std::string error;  // set when !ok
    Eigen::VectorXd weights;
    PortfolioStats stats;
    double kkt_residual = 0.0;
    bool converged = false;
    bool regularization_applied = false;
};

struct ComparisonReport {
    std::vector<std::string> tickers;
    double rf = 0.0;
    std::vector<ComparisonRow> rows;
    long mm_estimators = 0;
    long im_estimators = 0;
};

/// For every constraint: min-variance and max-Sharpe under the Markowitz
/// covariance and under the index-model covariance. A failing cell is
/// recorded in its row instead of aborting the report.
ComparisonReport compare_models(const MarkowitzEstimates& mm, const IndexModelEstimates& im, double rf,
                                const std::vector<ConstraintSet>& constraints, const SolverOptions& solver = {});

}  // namespace mvindex
