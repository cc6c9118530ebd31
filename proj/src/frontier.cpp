#include "mvindex/frontier.hpp"

#include "mvindex/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace mvindex {

namespace {

RiskReturn point_of(const PortfolioSolution& s) { return {s.stats.stdev, s.stats.ret}; }

/// Extremes of the single-asset means that the regime allows.
std::pair<double, double> asset_mean_span(const Eigen::VectorXd& mean, const ConstraintSet& c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        if (c.regime == Regime::C5_no_market && static_cast<std::size_t>(i) == c.market_index) continue;
        lo = std::min(lo, mean(i));
        hi = std::max(hi, mean(i));
    }
    return {lo, hi};
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        v[static_cast<std::size_t>(k)] = k == n - 1 ? b : a + (b - a) * static_cast<double>(k) / (n - 1);
    }
    return v;
}

/// Deterministic variates from a 64-bit Mersenne Twister. The standard
/// library distributions are implementation-defined, these are not.
class Variates {
public:
    explicit Variates(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential() { return -std::log(uniform()); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

constexpr int kMaxAttempts = 10000;
constexpr int kRejectionsBeforeShrink = 100;

Eigen::VectorXd normal_weights(Variates& rng, int n, const ConstraintSet& c) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z(i) = rng.normal();
        if (c.regime == Regime::C5_no_market) z(static_cast<Eigen::Index>(c.market_index)) = 0.0;
        const double s = z.sum();
        if (std::abs(s) > 1e-12) return z / s;
    }
    throw SamplingError("could not draw a normalizable weight vector");
}

bool feasible(const Eigen::VectorXd& w, const ConstraintSet& c) { return check_feasible(w, c, 1e-12).feasible; }

/// Largest t in [0, 1] with e + t (w - e) feasible, e = equal weights.
Eigen::VectorXd shrink_to_feasible(const Eigen::VectorXd& w, const ConstraintSet& c) {
    const auto n = w.size();
    const Eigen::VectorXd e = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    if (!feasible(e, c)) throw SamplingError(fmt::format("equal weights violate {}", c.code()));
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 100; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(e + mid * (w - e), c)) lo = mid;
        else hi = mid;
    }
    return e + lo * (w - e);
}

}  // namespace

FrontierCurve trace_frontier(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, double rf,
                             const ConstraintSet& c, int grid, const FrontierOptions& options) {
    if (grid < 2) throw DomainError(fmt::format("frontier grid must be >= 2, got {}", grid));
    FrontierCurve curve;
    curve.constraint = c;
    curve.model = options.model;
    curve.rf = rf;
    curve.min_variance = solve_min_variance(cov, mean, rf, c, options.solver);
    curve.min_variance.stats.model = options.model;
    try {
        curve.tangency = solve_max_sharpe(cov, mean, rf, c, options.solver);
        curve.tangency->stats.model = options.model;
    } catch (const UnboundedError& e) {
        curve.tangency_error = e.what();
    }

    const double r_mv = curve.min_variance.stats.ret;
    const auto range = feasible_return_range(mean, c);
    const auto [mu_lo, mu_hi] = asset_mean_span(mean, c);
    const double span = std::max(mu_hi - mu_lo, 0.0);

    double hi = range.hi;
    if (!std::isfinite(hi)) {
        hi = mu_hi;
        if (curve.tangency) hi = std::max(hi, curve.tangency->stats.ret);
        if (hi <= r_mv) hi = r_mv + span;
    }
    const double eps = 1e-12 * (1.0 + std::abs(r_mv) + span);

    auto solve_at = [&](double target) {
        auto s = solve_target_return(cov, mean, target, c, options.solver);
        return point_of(s);
    };

    std::vector<RiskReturn> pts;
    if (hi - r_mv > eps) {
        const auto targets = linspace(r_mv, hi, grid);
        pts.push_back(point_of(curve.min_variance));
        for (std::size_t k = 1; k < targets.size(); ++k) pts.push_back(solve_at(targets[k]));
        if (curve.tangency) {
            const double rt = curve.tangency->stats.ret;
            const bool inside = rt > r_mv + eps && rt < hi - eps;
            const bool duplicate = std::any_of(pts.begin(), pts.end(),
                                               [&](const RiskReturn& p) { return std::abs(p.ret - rt) <= eps; });
            if (inside && !duplicate) pts.push_back(point_of(*curve.tangency));
        }
    } else {
        pts.push_back(point_of(curve.min_variance));
    }

    if (options.include_inefficient) {
        double lo = range.lo;
        if (!std::isfinite(lo)) lo = std::min(mu_lo, 2.0 * r_mv - hi);
        if (r_mv - lo > eps) {
            const auto targets = linspace(lo, r_mv, grid);
            for (std::size_t k = 0; k + 1 < targets.size(); ++k) pts.push_back(solve_at(targets[k]));
        }
    }

    std::stable_sort(pts.begin(), pts.end(), [](const RiskReturn& a, const RiskReturn& b) { return a.ret < b.ret; });
    curve.points = std::move(pts);
    return curve;
}

std::optional<double> frontier_stdev_at(const FrontierCurve& curve, double ret) {
    const double r_mv = curve.min_variance.stats.ret;
    if (ret <= r_mv) return curve.min_variance.stats.stdev;
    const RiskReturn* prev = nullptr;
    for (const auto& p : curve.points) {
        if (p.ret < r_mv) continue;
        if (prev && ret <= p.ret) {
            const double dr = p.ret - prev->ret;
            if (dr <= 0.0) return std::max(p.stdev, prev->stdev);
            const double t = (ret - prev->ret) / dr;
            return prev->stdev + t * (p.stdev - prev->stdev);
        }
        prev = &p;
    }
    if (prev && std::abs(ret - prev->ret) <= 1e-15 * (1.0 + std::abs(ret))) return prev->stdev;
    return std::nullopt;
}

std::vector<RiskReturn> capital_allocation_line(double rf, const PortfolioStats& tangency, double sigma_max,
                                                int grid) {
    if (!(tangency.stdev > 0.0)) throw DomainError("capital allocation line needs a tangency stdev > 0");
    if (!(sigma_max > 0.0)) throw DomainError("capital allocation line needs sigma_max > 0");
    if (grid < 1) throw DomainError("capital allocation line grid must be positive");
    const double slope =
        std::isfinite(tangency.sharpe) ? tangency.sharpe : (tangency.ret - rf) / tangency.stdev;
    std::vector<double> sigmas = grid == 1 ? std::vector<double>{0.0} : linspace(0.0, sigma_max, grid);
    const double st = tangency.stdev;
    if (st <= sigma_max &&
        std::none_of(sigmas.begin(), sigmas.end(), [&](double s) { return std::abs(s - st) <= 1e-15 * st; })) {
        sigmas.insert(std::upper_bound(sigmas.begin(), sigmas.end(), st), st);
    }
    std::vector<RiskReturn> line;
    line.reserve(sigmas.size());
    for (double s : sigmas) line.push_back({s, s == st ? tangency.ret : rf + slope * s});
    if (line.front().stdev == 0.0) line.front().ret = rf;
    return line;
}

CloudSample sample_cloud(const ConstraintSet& c, int n_assets, int count, std::uint64_t seed) {
    if (count < 1) throw DomainError("cloud sample count must be positive");
    if (n_assets < 1) throw SamplingError("cloud sample needs at least one asset");
    if (c.regime == Regime::C5_no_market) {
        if (c.market_index >= static_cast<std::size_t>(n_assets)) {
            throw SamplingError(fmt::format("market index {} outside {} assets", c.market_index, n_assets));
        }
        if (n_assets < 2) throw SamplingError("C5 sampling needs a non-market asset");
    }

    Variates rng(seed);
    CloudSample out;
    out.constraint = c;
    out.seed = seed;
    out.weights.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        switch (c.regime) {
            case Regime::C4_long_only: {
                Eigen::VectorXd e(n_assets);
                for (int i = 0; i < n_assets; ++i) e(i) = rng.exponential();
                out.weights.push_back(e / e.sum());
                break;
            }
            case Regime::C3_free:
            case Regime::C5_no_market:
                out.weights.push_back(normal_weights(rng, n_assets, c));
                break;
            case Regime::C1_leverage:
            case Regime::C2_box: {
                Eigen::VectorXd w;
                bool accepted = false;
                for (int attempt = 0; attempt < kRejectionsBeforeShrink; ++attempt) {
                    w = normal_weights(rng, n_assets, c);
                    if (feasible(w, c)) {
                        accepted = true;
                        break;
                    }
                }
                out.weights.push_back(accepted ? w : shrink_to_feasible(w, c));
                break;
            }
        }
    }
    return out;
}

std::vector<RiskReturn> cloud_points(const CloudSample& sample, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& cov) {
    std::vector<RiskReturn> pts;
    pts.reserve(sample.weights.size());
    for (const auto& w : sample.weights) {
        const auto s = evaluate_portfolio(w, mean, cov, 0.0);
        pts.push_back({s.stdev, s.ret});
    }
    return pts;
}

ComparisonReport compare_models(const MarkowitzEstimates& mm, const IndexModelEstimates& im, double rf,
                                const std::vector<ConstraintSet>& constraints, const SolverOptions& solver) {
    if (mm.mean.size() != im.beta.size()) {
        throw ValidationError("Markowitz and index-model estimates cover different asset universes");
    }
    ComparisonReport report;
    report.tickers = mm.tickers;
    report.rf = rf;
    const auto n = static_cast<long>(mm.mean.size());
    report.mm_estimators = estimator_count(Model::MM, n);
    report.im_estimators = estimator_count(Model::IM, n);

    const Eigen::MatrixXd im_cov = im_covariance(im);
    const Eigen::VectorXd im_mean = im.expected_returns();

    for (const auto& c : constraints) {
        for (const Model model : {Model::MM, Model::IM}) {
            const Eigen::MatrixXd& cov = model == Model::MM ? mm.cov : im_cov;
            const Eigen::VectorXd& mean = model == Model::MM ? mm.mean : im_mean;
            for (const Objective obj : {Objective::min_variance, Objective::max_sharpe}) {
                ComparisonRow row;
                row.constraint = c;
                row.model = model;
                row.objective = obj;
                try {
                    const auto sol = obj == Objective::min_variance ? solve_min_variance(cov, mean, rf, c, solver)
                                                                    : solve_max_sharpe(cov, mean, rf, c, solver);
                    row.weights = sol.weights;
                    row.stats = evaluate_portfolio(sol.weights, mean, cov, rf, model);
                    row.kkt_residual = sol.kkt_residual;
                    row.converged = sol.converged;
                    row.regularization_applied = sol.regularization_applied;
                    row.ok = true;
                } catch (const Error& e) {
                    row.ok = false;
                    row.error = e.what();
                }
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

}  // namespace mvindex
