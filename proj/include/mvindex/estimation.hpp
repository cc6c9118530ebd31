#pragma once

// Markowitz (full covariance) and single-index (market regression) input
// sets, plus portfolio evaluation under either model.

#include "mvindex/data_ingest.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mvindex {

enum class Model { MM, IM };
enum class CovarianceDenominator { sample, population };
enum class RegressionMode { raw, excess };

std::string_view to_string(Model m);
std::string_view to_string(CovarianceDenominator d);
std::string_view to_string(RegressionMode m);

struct MarkowitzEstimates {
    std::vector<std::string> tickers;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd corr;
    std::size_t sample_size = 0;
    CovarianceDenominator denominator = CovarianceDenominator::sample;
};

struct IndexModelEstimates {
    std::vector<std::string> tickers;
    std::size_t market_index = 0;
    Eigen::VectorXd alpha;  // Jensen's alpha in excess mode
    Eigen::VectorXd beta;
    Eigen::VectorXd resid_var;
    double market_mean = 0.0;
    double market_var = 0.0;
    RegressionMode mode = RegressionMode::raw;
    double rf_used = 0.0;
    std::size_t sample_size = 0;

    std::size_t assets() const { return static_cast<std::size_t>(beta.size()); }
    /// Model-implied expected return of each asset.
    Eigen::VectorXd expected_returns() const;
};

struct PortfolioStats {
    double ret = 0.0;
    double stdev = 0.0;
    double sharpe = 0.0;  // NaN when stdev == 0
    Model model = Model::MM;
};

MarkowitzEstimates markowitz_estimates(const MonthlyReturnTable& returns,
                                       CovarianceDenominator denominator = CovarianceDenominator::sample);

struct IndexModelOptions {
    RegressionMode mode = RegressionMode::raw;
    double rf = 0.0;  // used only in excess mode
    /// sample: market variance over T-1, residual variance over T-2.
    /// population: both over T.
    CovarianceDenominator denominator = CovarianceDenominator::sample;
};

IndexModelEstimates index_model_estimates(const MonthlyReturnTable& returns,
                                          const IndexModelOptions& options = {});

/// beta beta^T market_var + diag(resid_var).
Eigen::MatrixXd im_covariance(const IndexModelEstimates& est);

PortfolioStats portfolio_stats(const Eigen::VectorXd& weights, const MarkowitzEstimates& mm, double rf);
PortfolioStats portfolio_stats(const Eigen::VectorXd& weights, const IndexModelEstimates& im, double rf);

/// Return/stdev/Sharpe of `weights` against an arbitrary mean/covariance pair.
PortfolioStats evaluate_portfolio(const Eigen::VectorXd& weights, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov, double rf, Model model = Model::MM);

double sharpe_ratio(double ret, double stdev, double rf);

/// Number of parameters each model must estimate for n assets.
long estimator_count(Model model, long n);

}  // namespace mvindex
