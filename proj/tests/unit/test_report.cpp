#include "oracles.hpp"

#include "mvindex/errors.hpp"
#include "mvindex/report.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace mvindex;

namespace {

struct Fixture {
    MonthlyReturnTable table;
    MarkowitzEstimates mm;
    IndexModelEstimates im;
    ComparisonReport report;

    Fixture() {
        oracle::Rng rng(61);
        table = MonthlyReturnTable::from_matrix(oracle::factor_returns(rng, 60, 2), 2, {"AAA", "BBB", "MKT"});
        mm = markowitz_estimates(table);
        im = index_model_estimates(table);
        report = compare_models(mm, im, 0.002, ConstraintSet::all(2));
    }
};

}  // namespace

TEST_SUITE("report") {

TEST_CASE("estimate JSON carries the documented keys") {
    const Fixture f;
    const auto m = to_json(f.mm);
    for (const char* key : {"tickers", "mean", "cov", "corr", "sample_size"}) CHECK(m.contains(key));
    CHECK(m["cov"].size() == 3);
    CHECK(m["cov"][0][1].get<double>() == f.mm.cov(0, 1));
    const auto i = to_json(f.im);
    for (const char* key : {"alpha", "beta", "resid_var", "market_mean", "market_var", "market"}) CHECK(i.contains(key));
    CHECK(i["market"] == "MKT");
}

TEST_CASE("solution JSON keys weights by ticker") {
    const Fixture f;
    const auto sol = solve_min_variance(f.mm.cov, f.mm.mean, 0.002, ConstraintSet::parse("c4", 2));
    const auto j = to_json(sol, f.table.tickers);
    for (const char* key : {"weights", "return", "stdev", "sharpe", "objective", "constraint", "kkt_residual",
                            "converged", "regularization_applied"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["weights"]["BBB"].get<double>() == sol.weights(1));
    CHECK(j["constraint"] == "c4");
    CHECK(j["objective"] == "min_variance");

    auto bare = solve_min_variance(f.mm.cov, ConstraintSet::parse("c3"));
    CHECK(to_json(bare, f.table.tickers)["return"].is_null());
}

TEST_CASE("comparison CSV layout") {
    const Fixture f;
    std::ostringstream out;
    write_comparison_csv(out, f.report);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("constraint,model,objective,AAA,BBB,MKT,Return,StDev,Sharpe", 0) == 0);
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 20);

    const auto j = to_json(f.report);
    CHECK(j["estimator_counts"]["MM"] == 9);
    CHECK(j["estimator_counts"]["IM"] == 11);
    CHECK(j["rows"].size() == 20);
}

TEST_CASE("emitted numbers keep at least nine significant digits") {
    std::ostringstream out;
    write_points_csv(out, {{0.0254428361234, 0.00214991766}});
    CHECK(out.str() == "stdev,return\n0.0254428361234,0.00214991766\n");
}

TEST_CASE("objective and model names") {
    CHECK(parse_objective("minvar") == Objective::min_variance);
    CHECK(parse_objective("max_sharpe") == Objective::max_sharpe);
    CHECK(parse_model("IM") == Model::IM);
    CHECK_THROWS_AS(parse_objective("best"), ConfigurationError);
    CHECK_THROWS_AS(parse_model("xx"), ConfigurationError);
}

TEST_CASE("deltas against an expected table") {
    const Fixture f;
    const auto* row = &f.report.rows.front();
    std::ostringstream csv;
    csv.precision(17);
    csv << "table,constraint,model,objective,AAA,BBB,MKT,Return,StDev,Sharpe\n";
    csv << "9," << row->constraint.code() << "," << to_string(row->model) << "," << to_string(row->objective) << ","
        << row->weights(0) + 0.25 << "," << row->weights(1) << "," << row->weights(2) << ",,,\n";
    const auto expected = parse_expected_table(csv.str());
    REQUIRE(expected.size() == 1);
    CHECK_FALSE(expected[0].ret.has_value());
    const auto deltas = diff_against_expected(f.report, expected);
    REQUIRE(deltas.size() == 1);
    CHECK(deltas[0].expected_table == "9");
    CHECK(deltas[0].weight_delta.at("AAA") == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(std::abs(deltas[0].weight_delta.at("BBB")) < 1e-15);

    std::ostringstream out;
    write_deltas_csv(out, deltas, f.table.tickers);
    CHECK(out.str().rfind("constraint,model,objective,expected_table,AAA,BBB,MKT,Return,StDev,Sharpe\n", 0) == 0);

    CHECK_THROWS_AS(parse_expected_table("model,objective\nMM,min_variance\n"), Error);
}

}  // TEST_SUITE
