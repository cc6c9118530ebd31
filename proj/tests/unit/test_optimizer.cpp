#include "oracles.hpp"

#include "mvindex/errors.hpp"
#include "mvindex/optimizer.hpp"
#include "mvindex/report.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace mvindex;

namespace {

Eigen::MatrixXd diag2(double a, double b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

ConstraintSet regime(Regime r, std::size_t market = 0) {
    ConstraintSet c;
    c.regime = r;
    c.market_index = market;
    return c;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Eigen::VectorXd expected_weights(const std::string& table, const std::string& objective) {
    std::ifstream in(std::filesystem::path(MVINDEX_DATA_DIR) / "expected" / "comparison.csv");
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& row : parse_expected_table(buf.str())) {
        if (row.table == table && row.objective == objective) {
            Eigen::VectorXd w(static_cast<Eigen::Index>(row.weights.size()));
            for (std::size_t i = 0; i < row.weights.size(); ++i) w(static_cast<Eigen::Index>(i)) = row.weights[i].second;
            return w;
        }
    }
    FAIL("fixture row missing");
    return {};
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("constraint codes") {
    CHECK(ConstraintSet::parse("C4").regime == Regime::C4_long_only);
    CHECK(ConstraintSet::parse("c5", 7).market_index == 7);
    CHECK(ConstraintSet::parse("c1").code() == "c1");
    CHECK_THROWS_AS(ConstraintSet::parse("c6"), ConfigurationError);
    const auto all = ConstraintSet::all(3);
    REQUIRE(all.size() == 5);
    for (const auto& c : all) CHECK(c.market_index == 3);
}

TEST_CASE("check_feasible") {
    SUBCASE("sign violation under long-only") {
        const auto r = check_feasible(vec({2.0, -1.0}), regime(Regime::C4_long_only), 1e-9);
        CHECK_FALSE(r.feasible);
        REQUIRE(r.violations.size() == 1);
        CHECK(r.violations[0].magnitude == doctest::Approx(1.0));
    }
    SUBCASE("full investment is always checked") {
        const auto r = check_feasible(vec({0.5, 0.4}), regime(Regime::C3_free), 1e-9);
        CHECK_FALSE(r.feasible);
        CHECK(r.violations[0].magnitude == doctest::Approx(0.1));
    }
    SUBCASE("leverage, box and market exclusion") {
        CHECK_FALSE(check_feasible(vec({2.0, -1.0}), regime(Regime::C1_leverage), 1e-9).feasible);
        CHECK(check_feasible(vec({1.5, -0.5}), regime(Regime::C1_leverage), 1e-9).feasible);
        CHECK_FALSE(check_feasible(vec({1.5, -0.5}), regime(Regime::C2_box), 1e-9).feasible);
        CHECK(check_feasible(vec({1.0, 1.0, -1.0}), regime(Regime::C2_box), 1e-9).feasible);
        CHECK_FALSE(check_feasible(vec({0.5, 0.5}), regime(Regime::C5_no_market, 1), 1e-9).feasible);
        CHECK(check_feasible(vec({1.0, 0.0}), regime(Regime::C5_no_market, 1), 1e-9).feasible);
    }
    SUBCASE("feasible iff no violations") {
        oracle::Rng rng(21);
        for (int k = 0; k < 200; ++k) {
            const auto w = rng.normal_vector(4, 0.25, 0.6);
            for (const auto& c : ConstraintSet::all(3)) {
                const auto r = check_feasible(w, c, 1e-7);
                CHECK(r.feasible == r.violations.empty());
            }
        }
    }
    SUBCASE("published long-only minimum-variance weights") {
        CHECK(check_feasible(expected_weights("12", "min_variance"), regime(Regime::C4_long_only, 10), 1e-4).feasible);
    }
    SUBCASE("published box-constrained maximum-Sharpe weights with active bounds") {
        const auto w = expected_weights("8", "max_sharpe");
        CHECK(check_feasible(w, regime(Regime::C2_box, 10), 1e-4).feasible);
        CHECK(w(5) == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(w(10) == doctest::Approx(-1.0).epsilon(1e-5));
    }
}

TEST_CASE("min variance of a diagonal pair is inverse-variance weighted") {
    const auto sol = solve_min_variance(diag2(0.01, 0.04), regime(Regime::C3_free));
    CHECK(sol.converged);
    CHECK(sol.weights(0) == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(sol.weights(1) == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(sol.stats.stdev * sol.stats.stdev == doctest::Approx(0.008).epsilon(1e-9));
    CHECK(std::isnan(sol.stats.ret));
}

TEST_CASE("identity covariance gives equal weights") {
    for (int n : {2, 5, 11}) {
        const auto sol = solve_min_variance(Eigen::MatrixXd::Identity(n, n), regime(Regime::C3_free));
        CHECK((sol.weights.array() - 1.0 / n).abs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("long-only min variance beats every point of a 0.01 simplex grid") {
    oracle::Rng rng(22);
    for (int k = 0; k < 5; ++k) {
        const Eigen::MatrixXd cov = rng.spd(3);
        const auto sol = solve_min_variance(cov, regime(Regime::C4_long_only));
        const double var = oracle::variance(sol.weights, cov);
        double best = std::numeric_limits<double>::infinity();
        oracle::simplex_grid3(0.01, [&](const Eigen::Vector3d& w) { best = std::min(best, oracle::variance(w, cov)); });
        CHECK(var <= best + 1e-12);
        CHECK(best - var < 1e-6);
        CHECK(sol.weights.minCoeff() >= -1e-9);
    }
}

TEST_CASE("max sharpe of a diagonal pair") {
    const auto sol = solve_max_sharpe(diag2(0.01, 0.04), vec({0.01, 0.02}), 0.0, regime(Regime::C3_free));
    CHECK(sol.converged);
    CHECK(sol.weights(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
    CHECK(sol.weights(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    CHECK(sol.stats.sharpe == doctest::Approx(std::sqrt(0.02)).epsilon(1e-8));
    CHECK(sol.rf == 0.0);
}

TEST_CASE("duplicate assets share a unique optimal Sharpe") {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(2, 2, 0.04);
    const auto mu = vec({0.02, 0.02});
    const auto sol = solve_max_sharpe(cov, mu, 0.005, regime(Regime::C4_long_only));
    CHECK(sol.stats.sharpe == doctest::Approx((0.02 - 0.005) / 0.2).epsilon(1e-7));
    CHECK(sol.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("long-only max Sharpe beats every point of a 0.01 simplex grid") {
    oracle::Rng rng(23);
    const double rf = 0.002;
    for (int k = 0; k < 5; ++k) {
        const Eigen::MatrixXd cov = rng.spd(3);
        const Eigen::VectorXd mu = rng.means(3, rf);
        const auto sol = solve_max_sharpe(cov, mu, rf, regime(Regime::C4_long_only));
        double best = -std::numeric_limits<double>::infinity();
        oracle::simplex_grid3(0.01, [&](const Eigen::Vector3d& w) { best = std::max(best, oracle::sharpe(w, mu, cov, rf)); });
        CHECK(sol.stats.sharpe >= best - 1e-6);
        CHECK(std::abs(sol.stats.sharpe - oracle::sharpe(sol.weights, mu, cov, rf)) < 1e-12);
    }
}

TEST_CASE("target return") {
    const auto cov = diag2(0.01, 0.04);
    const auto mu = vec({0.01, 0.02});
    SUBCASE("top of the range") {
        const auto sol = solve_target_return(cov, mu, 0.02, regime(Regime::C3_free));
        CHECK(sol.weights(0) == doctest::Approx(0.0).epsilon(1e-8));
        CHECK(sol.weights(1) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(sol.target == 0.02);
    }
    SUBCASE("the min-variance return reproduces the min-variance portfolio") {
        oracle::Rng rng(24);
        const Eigen::MatrixXd c5 = rng.spd(5);
        const Eigen::VectorXd m5 = rng.means(5, 0.0);
        const auto mv = solve_min_variance(c5, m5, 0.0, regime(Regime::C3_free));
        const auto t = solve_target_return(c5, m5, mv.stats.ret, regime(Regime::C3_free));
        CHECK((t.weights - mv.weights).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("unreachable targets") {
        CHECK_THROWS_AS(solve_target_return(cov, mu, 0.03, regime(Regime::C4_long_only)), InfeasibleError);
        CHECK_THROWS_AS(solve_target_return(cov, mu, 0.005, regime(Regime::C4_long_only)), InfeasibleError);
        try {
            solve_target_return(cov, mu, 0.03, regime(Regime::C4_long_only));
        } catch (const InfeasibleError& e) {
            CHECK(std::string(e.what()).find("0.02") != std::string::npos);
        }
    }
    SUBCASE("variance is convex in the target") {
        oracle::Rng rng(25);
        const Eigen::MatrixXd c4 = rng.spd(4);
        const Eigen::VectorXd m4 = rng.means(4, 0.0);
        for (const auto& c : ConstraintSet::all(3)) {
            const auto range = feasible_return_range(m4, c);
            const double lo = std::isfinite(range.lo) ? range.lo : m4.minCoeff() - 0.01;
            const double hi = std::isfinite(range.hi) ? range.hi : m4.maxCoeff() + 0.01;
            for (int k = 0; k < 5; ++k) {
                const double a = lo + (hi - lo) * rng.uniform(0.05, 0.95);
                const double b = lo + (hi - lo) * rng.uniform(0.05, 0.95);
                const double va = oracle::variance(solve_target_return(c4, m4, a, c).weights, c4);
                const double vb = oracle::variance(solve_target_return(c4, m4, b, c).weights, c4);
                const double vm = oracle::variance(solve_target_return(c4, m4, 0.5 * (a + b), c).weights, c4);
                CHECK(vm <= 0.5 * (va + vb) + 1e-10);
            }
        }
    }
}

TEST_CASE("feasible return range") {
    const auto mu = vec({0.01, 0.02, 0.005});
    const auto c4 = feasible_return_range(mu, regime(Regime::C4_long_only));
    CHECK(c4.lo == doctest::Approx(0.005));
    CHECK(c4.hi == doctest::Approx(0.02));
    const auto c3 = feasible_return_range(mu, regime(Regime::C3_free));
    CHECK(std::isinf(c3.lo));
    CHECK(std::isinf(c3.hi));
    // With leverage 2: 1.5 in the best asset and -0.5 in the worst.
    const auto c1 = feasible_return_range(mu, regime(Regime::C1_leverage));
    CHECK(c1.hi == doctest::Approx(1.5 * 0.02 - 0.5 * 0.005).epsilon(1e-12));
    CHECK(c1.lo == doctest::Approx(1.5 * 0.005 - 0.5 * 0.02).epsilon(1e-12));
    // With box 1 on three assets: (1, 1, -1) style corners.
    const auto c2 = feasible_return_range(mu, regime(Regime::C2_box));
    CHECK(c2.hi == doctest::Approx(0.02 + 0.01 - 0.005).epsilon(1e-12));
    CHECK(c2.lo == doctest::Approx(0.005 + 0.01 - 0.02).epsilon(1e-12));
}

TEST_CASE("closed forms") {
    CHECK((closed_form_min_variance(diag2(0.01, 0.04)) - vec({0.8, 0.2})).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((closed_form_min_variance(Eigen::MatrixXd::Identity(4, 4)).array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK((closed_form_tangency(diag2(0.01, 0.04), vec({0.01, 0.02}), 0.0) - vec({2.0 / 3.0, 1.0 / 3.0}))
              .cwiseAbs()
              .maxCoeff() < 1e-14);

    oracle::Rng rng(26);
    const Eigen::MatrixXd cov = rng.spd(5);
    SUBCASE("collinear means give the min-variance portfolio") {
        const double rf = 0.001;
        const Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, rf + 0.004);
        CHECK((closed_form_tangency(cov, flat, rf) - closed_form_min_variance(cov)).cwiseAbs().maxCoeff() < 1e-12);
        // Excess returns proportional to cov * 1 give equal weights instead.
        const Eigen::VectorXd mu = (rf + 0.5 * (cov * Eigen::VectorXd::Ones(5)).array()).matrix();
        CHECK((closed_form_tangency(cov, mu, rf).array() - 0.2).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("agree with the explicit-inverse oracle and the solver") {
        CHECK((closed_form_min_variance(cov) - oracle::min_variance_weights(cov)).cwiseAbs().maxCoeff() < 1e-10);
        const auto sol = solve_min_variance(cov, regime(Regime::C3_free));
        CHECK((sol.weights - closed_form_min_variance(cov)).cwiseAbs().maxCoeff() < 1e-8);
        const Eigen::VectorXd mu = rng.means(5, 0.002);
        const Eigen::VectorXd tw = closed_form_tangency(cov, mu, 0.002);
        if (tw.dot(mu) > 0.002) {
            const auto ms = solve_max_sharpe(cov, mu, 0.002, regime(Regime::C3_free));
            CHECK((ms.weights - tw).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SUBCASE("errors") {
        const Eigen::MatrixXd singular = Eigen::MatrixXd::Constant(2, 2, 1.0);
        CHECK_THROWS_AS(closed_form_min_variance(singular), SingularityError);
        CHECK_THROWS_AS(closed_form_tangency(singular, vec({0.01, 0.02}), 0.0), SingularityError);
        // 1' cov^-1 (mean - rf) = 0.
        CHECK_THROWS_AS(closed_form_tangency(Eigen::MatrixXd::Identity(2, 2), vec({0.01, -0.01}), 0.0), DomainError);
    }
}

TEST_CASE("KKT residual") {
    oracle::Rng rng(27);
    const Eigen::MatrixXd cov = rng.spd(4);
    const Eigen::VectorXd mu = rng.means(4, 0.002);
    SUBCASE("closed-form optimum") {
        PortfolioSolution s;
        s.weights = closed_form_min_variance(cov);
        s.objective = Objective::min_variance;
        s.constraint = regime(Regime::C3_free);
        CHECK(kkt_residual(s, cov, mu, 0.002) < 1e-10);

        PortfolioSolution moved = s;
        moved.weights(0) += 1e-3;
        moved.weights(1) -= 1e-3;
        CHECK(kkt_residual(moved, cov, mu, 0.002) > kkt_residual(s, cov, mu, 0.002));
    }
    SUBCASE("infeasible weights") {
        for (const auto& c : ConstraintSet::all(3)) {
            PortfolioSolution s = solve_min_variance(cov, c);
            s.weights(0) += 0.5;
            CHECK(kkt_residual(s, cov, mu, 0.002) > 0.1);
        }
    }
    SUBCASE("solver output under every regime") {
        for (const auto& c : ConstraintSet::all(3)) {
            const auto mv = solve_min_variance(cov, mu, 0.002, c);
            CHECK(mv.converged);
            CHECK(mv.kkt_residual <= 1e-6);
            CHECK(check_feasible(mv.weights, c, 1e-7).feasible);
        }
    }
}

TEST_CASE("ordering across nested regimes") {
    oracle::Rng rng(28);
    const double rf = 0.002;
    for (int k = 0; k < 5; ++k) {
        const Eigen::MatrixXd cov = rng.spd(5);
        Eigen::VectorXd mu = rng.means(5, rf);
        mu = mu.cwiseMax(rf + 0.001);
        auto sd = [&](Regime r) { return solve_min_variance(cov, regime(r, 4)).stats.stdev; };
        auto sr = [&](Regime r) { return solve_max_sharpe(cov, mu, rf, regime(r, 4)).stats.sharpe; };
        CHECK(sd(Regime::C3_free) <= sd(Regime::C1_leverage) + 1e-9);
        CHECK(sd(Regime::C1_leverage) <= sd(Regime::C4_long_only) + 1e-9);
        CHECK(sd(Regime::C3_free) <= sd(Regime::C2_box) + 1e-9);
        CHECK(sd(Regime::C2_box) <= sd(Regime::C4_long_only) + 1e-9);
        CHECK(sr(Regime::C3_free) >= sr(Regime::C1_leverage) - 1e-8);
        CHECK(sr(Regime::C1_leverage) >= sr(Regime::C4_long_only) - 1e-8);
        CHECK(sr(Regime::C3_free) >= sr(Regime::C2_box) - 1e-8);
        CHECK(sr(Regime::C2_box) >= sr(Regime::C4_long_only) - 1e-8);
    }
}

TEST_CASE("max Sharpe weights are invariant to covariance scaling") {
    oracle::Rng rng(29);
    const Eigen::MatrixXd cov = rng.spd(4);
    Eigen::VectorXd mu = rng.means(4, 0.002).cwiseMax(0.003);
    for (const auto& c : ConstraintSet::all(3)) {
        const auto a = solve_max_sharpe(cov, mu, 0.002, c);
        const auto b = solve_max_sharpe(cov * 7.5, mu, 0.002, c);
        CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(check_feasible(a.weights, c, 1e-7).feasible);
        CHECK(a.stats.sharpe == doctest::Approx(oracle::sharpe(a.weights, mu, cov, 0.002)).epsilon(1e-12));
    }
}

TEST_CASE("market exclusion zeroes the market weight exactly") {
    oracle::Rng rng(30);
    const Eigen::MatrixXd cov = rng.spd(4);
    const Eigen::VectorXd mu = rng.means(4, 0.002).cwiseMax(0.003);
    CHECK(solve_min_variance(cov, regime(Regime::C5_no_market, 2)).weights(2) == 0.0);
    CHECK(solve_max_sharpe(cov, mu, 0.002, regime(Regime::C5_no_market, 2)).weights(2) == 0.0);
}

TEST_CASE("leverage cap binds the gross exposure") {
    oracle::Rng rng(31);
    const Eigen::MatrixXd cov = rng.spd(6);
    const Eigen::VectorXd mu = rng.means(6, 0.002);
    const auto sol = solve_max_sharpe(cov, mu, 0.002, regime(Regime::C1_leverage));
    CHECK(sol.weights.cwiseAbs().sum() <= 2.0 + 1e-7);
    ConstraintSet tight = regime(Regime::C1_leverage);
    tight.leverage_limit = 1.0;
    CHECK(solve_max_sharpe(cov, mu, 0.002, tight).weights.minCoeff() >= -1e-8);
}

TEST_CASE("singular covariance is regularized and reported") {
    // Two perfectly correlated assets plus an independent one.
    Eigen::MatrixXd cov(3, 3);
    cov << 0.04, 0.04, 0.0, 0.04, 0.04, 0.0, 0.0, 0.0, 0.01;
    const auto sol = solve_min_variance(cov, regime(Regime::C3_free));
    CHECK(sol.regularization_applied);
    CHECK(sol.ridge == doctest::Approx(1e-10 * cov.trace() / 3.0));
    CHECK(sol.weights(0) + sol.weights(1) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(sol.weights(2) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("solver errors") {
    const auto cov = diag2(0.01, 0.04);
    SUBCASE("leverage below one") {
        ConstraintSet c = regime(Regime::C1_leverage);
        c.leverage_limit = 0.5;
        CHECK_THROWS_AS(solve_min_variance(cov, c), InfeasibleError);
    }
    SUBCASE("box too tight") {
        ConstraintSet c = regime(Regime::C2_box);
        c.box_bound = 0.4;
        CHECK_THROWS_AS(solve_min_variance(cov, c), InfeasibleError);
    }
    SUBCASE("indefinite covariance") {
        Eigen::MatrixXd bad(2, 2);
        bad << 0.01, 0.05, 0.05, 0.01;
        CHECK_THROWS_AS(solve_min_variance(bad, regime(Regime::C3_free)), ValidationError);
    }
    SUBCASE("no excess return available") {
        CHECK_THROWS_AS(solve_max_sharpe(cov, vec({0.001, 0.002}), 0.01, regime(Regime::C4_long_only)),
                        UnboundedError);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(solve_max_sharpe(cov, vec({0.01, 0.02, 0.03}), 0.0, regime(Regime::C3_free)),
                        ValidationError);
    }
}

TEST_CASE("repeated solves are bit-identical") {
    oracle::Rng rng(32);
    const Eigen::MatrixXd cov = rng.spd(6);
    const Eigen::VectorXd mu = rng.means(6, 0.002);
    for (const auto& c : ConstraintSet::all(5)) {
        const auto a = solve_min_variance(cov, mu, 0.002, c);
        const auto b = solve_min_variance(cov, mu, 0.002, c);
        CHECK(a.weights == b.weights);
    }
}

}  // TEST_SUITE
