#include "mvindex/optimizer.hpp"

#include "mvindex/errors.hpp"
#include "mvindex/numfmt.hpp"
#include "mvindex/qp.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace mvindex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_constraint(const ConstraintSet& c, Eigen::Index n) {
    if (n < 1) throw ValidationError("portfolio needs at least one asset");
    switch (c.regime) {
        case Regime::C1_leverage:
            if (!(c.leverage_limit >= 1.0)) {
                throw InfeasibleError(fmt::format("leverage limit {} < 1 excludes every fully invested portfolio",
                                                  c.leverage_limit));
            }
            break;
        case Regime::C2_box:
            if (!(c.box_bound * static_cast<double>(n) >= 1.0)) {
                throw InfeasibleError(fmt::format("box bound {} is too tight for {} assets", c.box_bound, n));
            }
            break;
        case Regime::C5_no_market:
            if (c.market_index >= static_cast<std::size_t>(n)) {
                throw ConfigurationError(fmt::format("market index {} out of range for {} assets", c.market_index, n));
            }
            if (n < 2) throw InfeasibleError("excluding the market leaves no asset to invest in");
            break;
        default:
            break;
    }
}

struct PreparedCov {
    Eigen::MatrixXd cov;
    bool regularized = false;
    double ridge = 0.0;
};

PreparedCov prepare_covariance(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) throw ValidationError("covariance must be square and non-empty");
    if (!cov.allFinite()) throw ValidationError("covariance contains non-finite entries");
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
        throw ValidationError("covariance is not symmetric");
    }
    PreparedCov p;
    p.cov = 0.5 * (cov + cov.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.cov, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) throw ValidationError("covariance is zero or negative definite");
    if (lmin < -1e-10 * lmax) {
        throw ValidationError(fmt::format("covariance is not positive semidefinite (min eigenvalue {:.3e})", lmin));
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(p.cov);
    if (llt.info() != Eigen::Success || lmin <= 1e-14 * lmax) {
        p.ridge = 1e-10 * p.cov.trace() / static_cast<double>(p.cov.rows());
        p.cov.diagonal().array() += p.ridge;
        p.regularized = true;
    }
    return p;
}

/// Decision variables: weights (or w+, w- for C1), plus kappa when the
/// problem is homogenized.
struct Layout {
    Eigen::Index n = 0;
    bool split = false;
    bool homogeneous = false;

    Eigen::Index weight_vars() const { return split ? 2 * n : n; }
    Eigen::Index size() const { return weight_vars() + (homogeneous ? 1 : 0); }
    Eigen::Index kappa() const { return weight_vars(); }

    /// Row over x representing a' w (or a' y).
    Eigen::RowVectorXd row(const Eigen::VectorXd& a) const {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(size());
        r.head(n) = a.transpose();
        if (split) r.segment(n, n) = -a.transpose();
        return r;
    }

    Eigen::VectorXd weights(const Eigen::VectorXd& x) const {
        Eigen::VectorXd w = split ? Eigen::VectorXd(x.head(n) - x.segment(n, n)) : Eigen::VectorXd(x.head(n));
        if (homogeneous) w /= x(kappa());
        return w;
    }
};

class ProgramBuilder {
public:
    explicit ProgramBuilder(Layout layout) : layout_(layout) {}

    /// a' w == rhs; in homogeneous form the constant moves onto kappa.
    void equal(const Eigen::VectorXd& a, double rhs) { add(eq_, eq_rhs_, layout_.row(a), rhs); }
    void less(const Eigen::VectorXd& a, double rhs) { add(in_, in_rhs_, layout_.row(a), rhs); }
    void less_raw(Eigen::RowVectorXd r, double rhs) { add(in_, in_rhs_, std::move(r), rhs); }
    void equal_fixed(const Eigen::VectorXd& a, double rhs) {
        eq_.push_back(layout_.row(a));
        eq_rhs_.push_back(rhs);
    }
    void less_fixed(Eigen::RowVectorXd r, double rhs) {
        in_.push_back(std::move(r));
        in_rhs_.push_back(rhs);
    }

    QuadraticProgram build(const Eigen::MatrixXd& cov) const {
        const auto nx = layout_.size();
        const auto n = layout_.n;
        QuadraticProgram qp;
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, nx);
        W.leftCols(n).setIdentity();
        if (layout_.split) W.middleCols(n, n) = -Eigen::MatrixXd::Identity(n, n);
        qp.H = 2.0 * W.transpose() * cov * W;
        qp.c = Eigen::VectorXd::Zero(nx);
        qp.A = stack(eq_, nx);
        qp.b = Eigen::Map<const Eigen::VectorXd>(eq_rhs_.data(), static_cast<Eigen::Index>(eq_rhs_.size()));
        qp.G = stack(in_, nx);
        qp.h = Eigen::Map<const Eigen::VectorXd>(in_rhs_.data(), static_cast<Eigen::Index>(in_rhs_.size()));
        return qp;
    }

private:
    void add(std::vector<Eigen::RowVectorXd>& rows, std::vector<double>& rhs, Eigen::RowVectorXd r,
             double value) const {
        if (layout_.homogeneous) {
            r(layout_.kappa()) -= value;
            value = 0.0;
        }
        rows.push_back(std::move(r));
        rhs.push_back(value);
    }

    static Eigen::MatrixXd stack(const std::vector<Eigen::RowVectorXd>& rows, Eigen::Index nx) {
        Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), nx);
        for (std::size_t i = 0; i < rows.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = rows[i];
        return M;
    }

    Layout layout_;
    std::vector<Eigen::RowVectorXd> eq_, in_;
    std::vector<double> eq_rhs_, in_rhs_;
};

/// Full investment plus the regime's own constraints.
void add_regime(ProgramBuilder& pb, const Layout& L, const ConstraintSet& c) {
    const auto n = L.n;
    pb.equal(Eigen::VectorXd::Ones(n), 1.0);
    switch (c.regime) {
        case Regime::C1_leverage: {
            for (Eigen::Index j = 0; j < 2 * n; ++j) {
                Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(L.size());
                r(j) = -1.0;
                pb.less_fixed(std::move(r), 0.0);
            }
            Eigen::RowVectorXd gross = Eigen::RowVectorXd::Zero(L.size());
            gross.head(2 * n).setOnes();
            pb.less_raw(std::move(gross), c.leverage_limit);
            break;
        }
        case Regime::C2_box:
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
                pb.less(e, c.box_bound);
                pb.less(-e, c.box_bound);
            }
            break;
        case Regime::C3_free:
            break;
        case Regime::C4_long_only:
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::VectorXd e = -Eigen::VectorXd::Unit(n, i);
                pb.less_fixed(L.row(e), 0.0);
            }
            break;
        case Regime::C5_no_market:
            pb.equal_fixed(Eigen::VectorXd::Unit(n, static_cast<Eigen::Index>(c.market_index)), 0.0);
            break;
    }
}

/// Removes solver noise from exact-zero structure of the regime.
void tidy_weights(Eigen::VectorXd& w, const ConstraintSet& c) {
    if (c.regime == Regime::C5_no_market) w(static_cast<Eigen::Index>(c.market_index)) = 0.0;
    if (c.regime == Regime::C4_long_only) {
        for (auto& v : w) {
            if (v < 0.0 && v > -1e-10) v = 0.0;
        }
    }
}

PortfolioSolution finish(const QpResult& r, const Layout& L, const ConstraintSet& c, Objective obj,
                         const PreparedCov& pc) {
    if (!r.converged) {
        throw NonConvergenceError(
            fmt::format("{} solve under {} did not converge after {} iterations (primal {:.3e}, dual {:.3e}, gap {:.3e})",
                        to_string(obj), c.code(), r.iterations, r.primal_residual, r.dual_residual, r.gap),
            r.iterations, std::max({r.primal_residual, r.dual_residual, r.gap}));
    }
    PortfolioSolution s;
    s.objective = obj;
    s.constraint = c;
    s.iterations = r.iterations;
    s.regularization_applied = pc.regularized;
    s.ridge = pc.ridge;
    if (L.homogeneous) {
        const double kappa = r.x(L.kappa());
        const double ymax = r.x.head(L.weight_vars()).cwiseAbs().maxCoeff();
        if (!(kappa > 1e-9 * std::max(ymax, 1.0))) {
            throw UnboundedError(
                "maximum Sharpe is not attained: the supremum is approached only with unbounded positions");
        }
    }
    s.weights = L.weights(r.x);
    tidy_weights(s.weights, c);
    return s;
}

void finalize(PortfolioSolution& s, const PreparedCov& pc, const Eigen::VectorXd* mean, double rf,
              const SolverOptions& options) {
    const Eigen::VectorXd zero_mean = Eigen::VectorXd::Zero(s.weights.size());
    const Eigen::VectorXd& mu = mean ? *mean : zero_mean;
    s.stats = evaluate_portfolio(s.weights, mu, pc.cov, rf);
    if (!mean) {
        s.stats.ret = std::numeric_limits<double>::quiet_NaN();
        s.stats.sharpe = std::numeric_limits<double>::quiet_NaN();
    }
    if (pc.regularized) {
        // Report risk against the caller's matrix, not the ridged one.
        const double var = s.weights.dot((pc.cov - pc.ridge * Eigen::MatrixXd::Identity(pc.cov.rows(), pc.cov.cols())) * s.weights);
        s.stats.stdev = std::sqrt(std::max(var, 0.0));
        if (mean && s.stats.stdev > 0.0) s.stats.sharpe = (s.stats.ret - rf) / s.stats.stdev;
    }
    s.kkt_residual = kkt_residual(s, pc.cov, mu, rf);
    const auto feas = check_feasible(s.weights, s.constraint, options.feasibility_tolerance);
    s.converged = feas.feasible && s.kkt_residual <= options.kkt_tolerance;
}

QpSettings qp_settings(const SolverOptions& o) {
    QpSettings q;
    q.max_iterations = o.max_iterations;
    return q;
}

PortfolioSolution min_variance_impl(const Eigen::MatrixXd& cov, const Eigen::VectorXd* mean, double rf,
                                    const ConstraintSet& c, const SolverOptions& options) {
    const auto pc = prepare_covariance(cov);
    const auto n = pc.cov.rows();
    validate_constraint(c, n);
    if (mean && mean->size() != n) throw ValidationError("mean and covariance dimensions disagree");
    const Layout L{n, c.regime == Regime::C1_leverage, false};
    ProgramBuilder pb(L);
    add_regime(pb, L, c);
    const auto r = solve_qp(pb.build(pc.cov), qp_settings(options));
    auto s = finish(r, L, c, Objective::min_variance, pc);
    finalize(s, pc, mean, rf, options);
    return s;
}

}  // namespace

std::string ConstraintSet::code() const {
    switch (regime) {
        case Regime::C1_leverage: return "c1";
        case Regime::C2_box: return "c2";
        case Regime::C3_free: return "c3";
        case Regime::C4_long_only: return "c4";
        case Regime::C5_no_market: return "c5";
    }
    return "c?";
}

std::string ConstraintSet::description() const {
    switch (regime) {
        case Regime::C1_leverage: return fmt::format("sum |w_i| <= {}", leverage_limit);
        case Regime::C2_box: return fmt::format("|w_i| <= {}", box_bound);
        case Regime::C3_free: return "free (full investment only)";
        case Regime::C4_long_only: return "w_i >= 0";
        case Regime::C5_no_market: return fmt::format("w[{}] = 0 (market excluded)", market_index);
    }
    return {};
}

ConstraintSet ConstraintSet::parse(std::string_view code, std::size_t market_index) {
    std::string lower(code);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    ConstraintSet c;
    c.market_index = market_index;
    if (lower == "c1") c.regime = Regime::C1_leverage;
    else if (lower == "c2") c.regime = Regime::C2_box;
    else if (lower == "c3") c.regime = Regime::C3_free;
    else if (lower == "c4") c.regime = Regime::C4_long_only;
    else if (lower == "c5") c.regime = Regime::C5_no_market;
    else throw ConfigurationError(fmt::format("unknown constraint '{}' (expected c1..c5)", code));
    return c;
}

std::vector<ConstraintSet> ConstraintSet::all(std::size_t market_index) {
    std::vector<ConstraintSet> out;
    for (const char* code : {"c1", "c2", "c3", "c4", "c5"}) out.push_back(parse(code, market_index));
    return out;
}

std::string_view to_string(Objective o) {
    switch (o) {
        case Objective::min_variance: return "min_variance";
        case Objective::max_sharpe: return "max_sharpe";
        case Objective::target_return: return "target_return";
    }
    return "?";
}

FeasibilityReport check_feasible(const Eigen::VectorXd& w, const ConstraintSet& c, double tol) {
    FeasibilityReport rep;
    auto flag = [&](std::string name, double magnitude) {
        if (magnitude > tol) rep.violations.push_back({std::move(name), magnitude});
    };
    if (!w.allFinite()) {
        rep.violations.push_back({"finite", kInf});
        rep.feasible = false;
        return rep;
    }
    flag("full_investment", std::abs(w.sum() - 1.0));
    switch (c.regime) {
        case Regime::C1_leverage:
            flag("leverage", w.cwiseAbs().sum() - c.leverage_limit);
            break;
        case Regime::C2_box:
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                flag(fmt::format("box[{}]", i), std::abs(w(i)) - c.box_bound);
            }
            break;
        case Regime::C3_free:
            break;
        case Regime::C4_long_only:
            for (Eigen::Index i = 0; i < w.size(); ++i) flag(fmt::format("long_only[{}]", i), -w(i));
            break;
        case Regime::C5_no_market:
            if (c.market_index >= static_cast<std::size_t>(w.size())) {
                rep.violations.push_back({"market_index", kInf});
            } else {
                flag("no_market", std::abs(w(static_cast<Eigen::Index>(c.market_index))));
            }
            break;
    }
    rep.feasible = rep.violations.empty();
    return rep;
}

ReturnRange feasible_return_range(const Eigen::VectorXd& mean, const ConstraintSet& c) {
    const auto n = mean.size();
    validate_constraint(c, n);
    const double mu_max = mean.maxCoeff();
    const double mu_min = mean.minCoeff();
    switch (c.regime) {
        case Regime::C3_free:
            return mu_max > mu_min ? ReturnRange{-kInf, kInf} : ReturnRange{mu_min, mu_max};
        case Regime::C5_no_market: {
            double lo = kInf, hi = -kInf;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (static_cast<std::size_t>(i) == c.market_index) continue;
                lo = std::min(lo, mean(i));
                hi = std::max(hi, mean(i));
            }
            return hi > lo ? ReturnRange{-kInf, kInf} : ReturnRange{lo, hi};
        }
        case Regime::C4_long_only:
            return {mu_min, mu_max};
        case Regime::C1_leverage: {
            // Long (1+L)/2 in the best asset, short (L-1)/2 in the worst.
            const double lo_leg = 0.5 * (1.0 + c.leverage_limit);
            const double sh_leg = 0.5 * (c.leverage_limit - 1.0);
            return {lo_leg * mu_min - sh_leg * mu_max, lo_leg * mu_max - sh_leg * mu_min};
        }
        case Regime::C2_box: {
            // Start every weight at -B and hand out the remaining budget to
            // the best (or worst) assets first, 2B at a time.
            auto extreme = [&](const Eigen::VectorXd& mu) {
                std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mu(a) > mu(b); });
                Eigen::VectorXd w = Eigen::VectorXd::Constant(n, -c.box_bound);
                double budget = 1.0 + static_cast<double>(n) * c.box_bound;
                for (auto i : order) {
                    const double add = std::min(2.0 * c.box_bound, budget);
                    w(i) += add;
                    budget -= add;
                }
                return mu.dot(w);
            };
            return {-extreme(-mean), extreme(mean)};
        }
    }
    return {-kInf, kInf};
}

PortfolioSolution solve_min_variance(const Eigen::MatrixXd& cov, const ConstraintSet& c,
                                     const SolverOptions& options) {
    return min_variance_impl(cov, nullptr, 0.0, c, options);
}

PortfolioSolution solve_min_variance(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                                     const ConstraintSet& c, const SolverOptions& options) {
    return min_variance_impl(cov, &mean, rf, c, options);
}

PortfolioSolution solve_max_sharpe(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                                   const ConstraintSet& c, const SolverOptions& options) {
    const auto pc = prepare_covariance(cov);
    const auto n = pc.cov.rows();
    validate_constraint(c, n);
    if (mean.size() != n) throw ValidationError("mean and covariance dimensions disagree");
    if (!mean.allFinite() || !std::isfinite(rf)) throw ValidationError("mean and rf must be finite");

    const auto range = feasible_return_range(mean, c);
    const Eigen::VectorXd excess = mean.array() - rf;
    const double excess_scale = excess.cwiseAbs().maxCoeff();
    if (!(range.hi > rf) || !(excess_scale > 0.0)) {
        throw UnboundedError(fmt::format(
            "Sharpe ratio undefined: no portfolio under {} has a positive excess return over rf = {}", c.code(), rf));
    }

    const Layout L{n, c.regime == Regime::C1_leverage, true};
    ProgramBuilder pb(L);
    add_regime(pb, L, c);
    pb.equal_fixed(excess / excess_scale, 1.0);
    Eigen::RowVectorXd kappa_lb = Eigen::RowVectorXd::Zero(L.size());
    kappa_lb(L.kappa()) = -1.0;
    pb.less_fixed(std::move(kappa_lb), 0.0);

    const auto r = solve_qp(pb.build(pc.cov), qp_settings(options));
    auto s = finish(r, L, c, Objective::max_sharpe, pc);
    s.rf = rf;
    finalize(s, pc, &mean, rf, options);
    return s;
}

PortfolioSolution solve_target_return(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double target,
                                      const ConstraintSet& c, const SolverOptions& options) {
    const auto pc = prepare_covariance(cov);
    const auto n = pc.cov.rows();
    validate_constraint(c, n);
    if (mean.size() != n) throw ValidationError("mean and covariance dimensions disagree");
    if (!std::isfinite(target)) throw ValidationError("target return must be finite");

    const auto range = feasible_return_range(mean, c);
    const double slack = 1e-10 * (1.0 + mean.cwiseAbs().maxCoeff());
    if (target < range.lo - slack || target > range.hi + slack) {
        throw InfeasibleError(fmt::format("target return {} outside the attainable interval [{}, {}] under {}",
                                          format_number(target), format_number(range.lo), format_number(range.hi),
                                          c.code()));
    }
    const double t = std::clamp(target, range.lo, range.hi);
    const Layout L{n, c.regime == Regime::C1_leverage, false};
    ProgramBuilder pb(L);
    add_regime(pb, L, c);
    // A single attainable return makes the target row redundant.
    if (range.hi - range.lo > slack) pb.equal_fixed(mean, t);

    const auto r = solve_qp(pb.build(pc.cov), qp_settings(options));
    auto s = finish(r, L, c, Objective::target_return, pc);
    s.target = t;
    finalize(s, pc, &mean, 0.0, options);
    s.stats.sharpe = std::numeric_limits<double>::quiet_NaN();
    return s;
}

Eigen::VectorXd closed_form_min_variance(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) throw ValidationError("covariance must be square and non-empty");
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
        throw SingularityError("covariance is singular; closed-form minimum variance undefined");
    }
    const Eigen::VectorXd z = llt.solve(Eigen::VectorXd::Ones(cov.rows()));
    return z / z.sum();
}

Eigen::VectorXd closed_form_tangency(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf) {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
        throw ValidationError("mean and covariance dimensions disagree");
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15) {
        throw SingularityError("covariance is singular; closed-form tangency undefined");
    }
    const Eigen::VectorXd z = llt.solve((mean.array() - rf).matrix());
    const double norm = z.sum();
    if (!(std::abs(norm) > 1e-14 * z.cwiseAbs().sum())) {
        throw DomainError("degenerate tangency: 1' cov^-1 (mean - rf) is zero");
    }
    return z / norm;
}

}  // namespace mvindex
