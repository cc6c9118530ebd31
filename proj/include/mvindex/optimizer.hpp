#pragma once

// Constrained minimum-variance, maximum-Sharpe and target-return portfolios.
//
// Every regime carries the full-investment equality sum(w) = 1. Maximum
// Sharpe is solved as a convex QP through the homogenizing change of
// variables y = kappa * w, kappa > 0:
//
//     minimize    y' cov y
//     subject to  (mean - rf)' y = 1,   1' y = kappa,   regime(y, kappa)
//
// after which w = y / kappa. Gross leverage (C1) is handled by splitting
// w = w+ - w- with both parts nonnegative.

#include "mvindex/estimation.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvindex {

enum class Regime { C1_leverage, C2_box, C3_free, C4_long_only, C5_no_market };

struct ConstraintSet {
    Regime regime = Regime::C3_free;
    std::size_t market_index = 0;  // C5 only
    double leverage_limit = 2.0;   // C1: sum |w_i| <= leverage_limit
    double box_bound = 1.0;        // C2: |w_i| <= box_bound

    /// Short code: c1..c5.
    std::string code() const;
    std::string description() const;
    /// Accepts c1..c5 (case-insensitive); throws ConfigurationError otherwise.
    static ConstraintSet parse(std::string_view code, std::size_t market_index = 0);
    static std::vector<ConstraintSet> all(std::size_t market_index);
};

struct Violation {
    std::string constraint;
    double magnitude = 0.0;
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<Violation> violations;
};

/// Checks sum(w) = 1 and the regime's own constraints; reports every
/// violation larger than `tol`.
FeasibilityReport check_feasible(const Eigen::VectorXd& weights, const ConstraintSet& c, double tol);

enum class Objective { min_variance, max_sharpe, target_return };
std::string_view to_string(Objective o);

struct SolverOptions {
    int max_iterations = 10000;
    double kkt_tolerance = 1e-6;
    /// Feasibility tolerance of the published solution.
    double feasibility_tolerance = 1e-7;
};

struct PortfolioSolution {
    Eigen::VectorXd weights;
    /// Return/stdev/Sharpe against the inputs of the solve. For
    /// solve_min_variance without a mean the return and Sharpe are NaN.
    PortfolioStats stats;
    Objective objective = Objective::min_variance;
    ConstraintSet constraint;
    double target = 0.0;  // target_return only
    double rf = 0.0;      // max_sharpe only
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool regularization_applied = false;
    double ridge = 0.0;
};

PortfolioSolution solve_min_variance(const Eigen::MatrixXd& cov, const ConstraintSet& c,
                                     const SolverOptions& options = {});
/// Same solve, with return and Sharpe filled from `mean` and `rf`.
PortfolioSolution solve_min_variance(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                                     const ConstraintSet& c, const SolverOptions& options = {});

PortfolioSolution solve_max_sharpe(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                                   const ConstraintSet& c, const SolverOptions& options = {});

PortfolioSolution solve_target_return(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double target,
                                      const ConstraintSet& c, const SolverOptions& options = {});

/// Attainable interval of mean'w over the regime's feasible set. Either end
/// may be infinite (C3, C5).
struct ReturnRange {
    double lo = 0.0;
    double hi = 0.0;
};
ReturnRange feasible_return_range(const Eigen::VectorXd& mean, const ConstraintSet& c);

/// Sigma^-1 1 / (1' Sigma^-1 1). Throws SingularityError.
Eigen::VectorXd closed_form_min_variance(const Eigen::MatrixXd& cov);
/// Sigma^-1 (mean - rf 1), normalized to sum to one.
Eigen::VectorXd closed_form_tangency(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf);

/// First-order optimality residual of `solution` (max of stationarity,
/// complementary slackness and feasibility violations). Multipliers of the
/// active constraints are recovered by nonnegative least squares.
double kkt_residual(const PortfolioSolution& solution, const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean,
                    double rf);

}  // namespace mvindex
