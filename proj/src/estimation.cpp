#include "mvindex/estimation.hpp"

#include "mvindex/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvindex {

std::string_view to_string(Model m) { return m == Model::MM ? "MM" : "IM"; }

std::string_view to_string(CovarianceDenominator d) {
    return d == CovarianceDenominator::sample ? "sample" : "population";
}

std::string_view to_string(RegressionMode m) { return m == RegressionMode::raw ? "raw" : "excess"; }

namespace {

void require_finite(const MonthlyReturnTable& t) {
    if (!t.returns.allFinite()) throw ValidationError("return table contains non-finite values");
    if (t.tickers.size() != t.assets()) throw ValidationError("ticker count does not match return columns");
}

}  // namespace

MarkowitzEstimates markowitz_estimates(const MonthlyReturnTable& returns, CovarianceDenominator denominator) {
    const auto t = returns.returns.rows();
    if (t < 2) throw InsufficientDataError(fmt::format("Markowitz estimates need T >= 2, got {}", t));
    require_finite(returns);

    MarkowitzEstimates est;
    est.tickers = returns.tickers;
    est.sample_size = static_cast<std::size_t>(t);
    est.denominator = denominator;
    est.mean = returns.returns.colwise().mean().transpose();

    const Eigen::MatrixXd centered = returns.returns.rowwise() - est.mean.transpose();
    const double denom = denominator == CovarianceDenominator::sample ? static_cast<double>(t - 1)
                                                                      : static_cast<double>(t);
    est.cov = (centered.transpose() * centered) / denom;
    est.cov = 0.5 * (est.cov + est.cov.transpose()).eval();

    const Eigen::Index n = est.cov.rows();
    Eigen::VectorXd sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(est.cov(i, i) > 0.0)) {
            throw DomainError(fmt::format("correlation undefined: '{}' has zero variance",
                                          est.tickers[static_cast<std::size_t>(i)]));
        }
        sd(i) = std::sqrt(est.cov(i, i));
    }
    est.corr = est.cov.array() / (sd * sd.transpose()).array();
    for (Eigen::Index i = 0; i < n; ++i) {
        est.corr(i, i) = 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) est.corr(i, j) = std::clamp(est.corr(i, j), -1.0, 1.0);
        }
    }
    return est;
}

IndexModelEstimates index_model_estimates(const MonthlyReturnTable& returns, const IndexModelOptions& options) {
    const auto t = returns.returns.rows();
    if (t < 3) throw InsufficientDataError(fmt::format("index model needs T >= 3, got {}", t));
    require_finite(returns);
    const auto n = returns.returns.cols();
    const auto m = static_cast<Eigen::Index>(returns.market_index);
    if (m >= n) throw ValidationError("market index out of range");

    const bool excess = options.mode == RegressionMode::excess;
    const double shift = excess ? options.rf : 0.0;
    const Eigen::VectorXd x = returns.returns.col(m).array() - shift;
    const double x_mean = x.mean();
    const Eigen::VectorXd xc = x.array() - x_mean;
    const double sxx = xc.squaredNorm();
    if (!(sxx > 0.0)) throw DomainError("degenerate regressor: market column has zero variance");

    const bool sample = options.denominator == CovarianceDenominator::sample;
    IndexModelEstimates est;
    est.tickers = returns.tickers;
    est.market_index = returns.market_index;
    est.mode = options.mode;
    est.rf_used = excess ? options.rf : 0.0;
    est.sample_size = static_cast<std::size_t>(t);
    est.market_mean = returns.returns.col(m).mean();
    est.market_var = sxx / static_cast<double>(sample ? t - 1 : t);
    est.alpha.resize(n);
    est.beta.resize(n);
    est.resid_var.resize(n);

    const double resid_denom = static_cast<double>(sample ? t - 2 : t);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i == m) {
            est.alpha(i) = 0.0;
            est.beta(i) = 1.0;
            est.resid_var(i) = 0.0;
            continue;
        }
        const Eigen::VectorXd y = returns.returns.col(i).array() - shift;
        const double y_mean = y.mean();
        const double b = xc.dot((y.array() - y_mean).matrix()) / sxx;
        const double a = y_mean - b * x_mean;
        const Eigen::VectorXd resid = y.array() - a - b * x.array();
        est.alpha(i) = a;
        est.beta(i) = b;
        est.resid_var(i) = resid.squaredNorm() / resid_denom;
    }
    return est;
}

Eigen::VectorXd IndexModelEstimates::expected_returns() const {
    if (mode == RegressionMode::raw) return alpha.array() + beta.array() * market_mean;
    return rf_used + alpha.array() + beta.array() * (market_mean - rf_used);
}

Eigen::MatrixXd im_covariance(const IndexModelEstimates& est) {
    const auto n = est.beta.size();
    if (est.alpha.size() != n || est.resid_var.size() != n) {
        throw ValidationError("index model vectors have mismatched lengths");
    }
    if (!(est.market_var > 0.0) || !std::isfinite(est.market_var)) {
        throw ValidationError("index model market variance must be positive");
    }
    if ((est.resid_var.array() < 0.0).any()) throw ValidationError("negative residual variance");
    Eigen::MatrixXd cov = est.market_var * est.beta * est.beta.transpose();
    cov.diagonal() += est.resid_var;
    return cov;
}

namespace {

void check_weights(const Eigen::VectorXd& w, Eigen::Index n) {
    if (w.size() != n) {
        throw ContractViolation(fmt::format("weight vector has {} entries, expected {}", w.size(), n));
    }
    if (!w.allFinite()) throw ContractViolation("weights must be finite");
    const double s = w.sum();
    if (std::abs(s - 1.0) > 1e-9) throw ContractViolation(fmt::format("weights sum to {:.12g}, not 1", s));
}

PortfolioStats finish_stats(double ret, double var, double rf, Model model) {
    if (var < -1e-12) throw NumericalError(fmt::format("negative portfolio variance {:.6g}", var));
    PortfolioStats s;
    s.model = model;
    s.ret = ret;
    s.stdev = std::sqrt(std::max(var, 0.0));
    s.sharpe = s.stdev > 0.0 ? (ret - rf) / s.stdev : std::numeric_limits<double>::quiet_NaN();
    return s;
}

}  // namespace

PortfolioStats portfolio_stats(const Eigen::VectorXd& w, const MarkowitzEstimates& mm, double rf) {
    check_weights(w, mm.mean.size());
    return finish_stats(w.dot(mm.mean), w.dot(mm.cov * w), rf, Model::MM);
}

PortfolioStats portfolio_stats(const Eigen::VectorXd& w, const IndexModelEstimates& im, double rf) {
    check_weights(w, im.beta.size());
    const double ret = w.dot(im.expected_returns());
    const double beta_p = w.dot(im.beta);
    const double var = beta_p * beta_p * im.market_var + w.cwiseAbs2().dot(im.resid_var);
    return finish_stats(ret, var, rf, Model::IM);
}

PortfolioStats evaluate_portfolio(const Eigen::VectorXd& w, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov, double rf, Model model) {
    if (w.size() != mean.size() || cov.rows() != w.size() || cov.cols() != w.size()) {
        throw ContractViolation("weights, mean and covariance dimensions disagree");
    }
    return finish_stats(w.dot(mean), w.dot(cov * w), rf, model);
}

double sharpe_ratio(double ret, double stdev, double rf) {
    if (!(stdev > 0.0)) throw DomainError(fmt::format("Sharpe ratio needs stdev > 0, got {}", stdev));
    return (ret - rf) / stdev;
}

long estimator_count(Model model, long n) {
    if (n < 1) throw DomainError(fmt::format("estimator count needs n >= 1, got {}", n));
    return model == Model::MM ? 2 * n + n * (n - 1) / 2 : 3 * n + 2;
}

}  // namespace mvindex
