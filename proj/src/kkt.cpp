#include "mvindex/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mvindex {

namespace {

/// Lawson-Hanson: argmin ||M x - b|| subject to x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& M, const Eigen::VectorXd& b) {
    const auto n = M.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (n == 0) return x;
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-13 * std::max(1.0, M.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Eigen::MatrixXd Mp(M.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) Mp.col(static_cast<Eigen::Index>(k)) = M.col(idx[k]);
        const Eigen::VectorXd zp = Mp.completeOrthogonalDecomposition().solve(b);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
        return z;
    };

    for (int outer = 0; outer < 3 * static_cast<int>(n) + 10; ++outer) {
        const Eigen::VectorXd w = M.transpose() * (b - M * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
            Eigen::VectorXd z = solve_passive();
            double alpha = 1.0;
            bool clipped = false;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
                    const double denom = x(j) - z(j);
                    if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
                    clipped = true;
                }
            }
            if (!clipped) {
                x = z;
                break;
            }
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
    }
    return x;
}

struct ConstraintRow {
    Eigen::VectorXd grad;  // in decision-variable space
    double slack = 0.0;    // inequality: rhs - lhs (>= 0 when satisfied)
    bool equality = false;
};

}  // namespace

double kkt_residual(const PortfolioSolution& sol, const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean,
                    double rf) {
    const Eigen::VectorXd& w = sol.weights;
    const auto n = w.size();
    const auto& c = sol.constraint;
    if (cov.rows() != n || cov.cols() != n || !w.allFinite()) return std::numeric_limits<double>::infinity();
    const bool needs_mean = sol.objective != Objective::min_variance;
    if (needs_mean && mean.size() != n) return std::numeric_limits<double>::infinity();

    // Objective gradient in weight space (minimization form).
    Eigen::VectorXd g;
    const Eigen::VectorXd cov_w = cov * w;
    if (sol.objective == Objective::max_sharpe) {
        const double var = w.dot(cov_w);
        if (!(var > 0.0)) return std::numeric_limits<double>::infinity();
        const double sd = std::sqrt(var);
        const double excess = w.dot(mean) - rf;
        g = -(mean / sd - excess * cov_w / (var * sd));
    } else {
        const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
        g = 2.0 * cov_w / scale;
    }

    const bool split = c.regime == Regime::C1_leverage;
    const Eigen::Index nx = split ? 2 * n : n;
    auto lift = [&](const Eigen::VectorXd& a) {
        if (!split) return a;
        Eigen::VectorXd r(nx);
        r << a, -a;
        return r;
    };
    const Eigen::VectorXd grad_x = lift(g);

    std::vector<ConstraintRow> rows;
    rows.push_back({lift(Eigen::VectorXd::Ones(n)), 0.0, true});
    if (c.regime == Regime::C5_no_market && c.market_index < static_cast<std::size_t>(n)) {
        rows.push_back({lift(Eigen::VectorXd::Unit(n, static_cast<Eigen::Index>(c.market_index))), 0.0, true});
    }
    if (sol.objective == Objective::target_return) rows.push_back({lift(mean), 0.0, true});

    switch (c.regime) {
        case Regime::C1_leverage: {
            const Eigen::VectorXd up = w.cwiseMax(0.0);
            const Eigen::VectorXd down = (-w).cwiseMax(0.0);
            for (Eigen::Index j = 0; j < nx; ++j) {
                const double v = j < n ? up(j) : down(j - n);
                rows.push_back({-Eigen::VectorXd::Unit(nx, j), v, false});
            }
            rows.push_back({Eigen::VectorXd::Ones(nx), c.leverage_limit - w.cwiseAbs().sum(), false});
            break;
        }
        case Regime::C2_box:
            for (Eigen::Index i = 0; i < n; ++i) {
                rows.push_back({Eigen::VectorXd::Unit(n, i), c.box_bound - w(i), false});
                rows.push_back({-Eigen::VectorXd::Unit(n, i), c.box_bound + w(i), false});
            }
            break;
        case Regime::C4_long_only:
            for (Eigen::Index i = 0; i < n; ++i) rows.push_back({-Eigen::VectorXd::Unit(n, i), w(i), false});
            break;
        default:
            break;
    }

    constexpr double active_tol = 1e-7;
    std::vector<Eigen::VectorXd> cols;
    std::vector<double> col_slack;
    for (const auto& r : rows) {
        if (r.equality) {
            cols.push_back(r.grad);
            col_slack.push_back(0.0);
            cols.push_back(-r.grad);
            col_slack.push_back(0.0);
        } else if (r.slack <= active_tol) {
            cols.push_back(r.grad);
            col_slack.push_back(r.slack);
        }
    }
    Eigen::MatrixXd M(nx, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) M.col(static_cast<Eigen::Index>(k)) = cols[k];

    const Eigen::VectorXd lambda = nnls(M, -grad_x);
    const double stationarity = (M * lambda + grad_x).cwiseAbs().maxCoeff();
    double complementarity = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        complementarity = std::max(complementarity, lambda(static_cast<Eigen::Index>(k)) * std::abs(col_slack[k]));
    }
    double infeasibility = 0.0;
    for (const auto& v : check_feasible(w, c, 0.0).violations) infeasibility = std::max(infeasibility, v.magnitude);
    if (sol.objective == Objective::target_return) {
        infeasibility = std::max(infeasibility, std::abs(w.dot(mean) - sol.target));
    }
    return std::max({stationarity, complementarity, infeasibility});
}

}  // namespace mvindex
