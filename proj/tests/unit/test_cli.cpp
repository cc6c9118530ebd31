#include "commands.hpp"

#include "mvindex/optimizer.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("mvindex-cli-" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "mvindex");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = mvindex::app::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const std::string prices = (fs::path(MVINDEX_DATA_DIR) / "synthetic_prices.csv").string();
const std::string riskfree = (fs::path(MVINDEX_DATA_DIR) / "synthetic_riskfree.csv").string();

/// One row per month of a stock and the market, with a fixed seed.
std::string two_asset_prices(int months) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::string csv = "date,A,MKT\n";
    double a = 10.0, m = 100.0;
    for (int i = 0; i < months; ++i) {
        const double f = 0.006 + 0.04 * n(rng);
        m *= 1.0 + f;
        a *= 1.0 + 0.004 + 1.3 * f + 0.05 * n(rng);
        char line[64];
        std::snprintf(line, sizeof line, "%04d-%02d-01,%.6f,%.6f\n", 2015 + i / 12, i % 12 + 1, a, m);
        csv += line;
    }
    return csv;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_SUITE("cli-report") {

TEST_CASE("ingest on a two-month file yields one return row") {
    const auto dir = scratch("ingest-toy");
    spit(dir / "p.csv", "date,A,MKT\n2020-01-02,10,100\n2020-02-03,11,101\n");
    const auto r = run({"ingest", "--prices", (dir / "p.csv").string(), "--market", "MKT", "--rf", "0.001", "--out",
                        (dir / "out").string()});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "out" / "monthly_returns.csv");
    CHECK(count_of(text, "\n") == 2);
    CHECK(text.find("2020-02,0.1,0.01\n") != std::string::npos);
}

TEST_CASE("ingest on the bundled data") {
    const auto dir = scratch("ingest-full");
    const auto r = run({"ingest", "--prices", prices, "--riskfree", riskfree, "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("127") != std::string::npos);
    CHECK(r.out.find("0.00213991") != std::string::npos);
}

TEST_CASE("rf override makes the risk-free file optional") {
    const auto dir = scratch("override");
    const auto r = run({"ingest", "--prices", prices, "--riskfree", (dir / "missing.csv").string(), "--rf", "0.002",
                        "--out", dir.string()});
    CHECK(r.code == 0);
    const auto m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m["rf"].get<double>() == 0.002);
}

TEST_CASE("solve writes one file per model and objective") {
    const auto dir = scratch("solve-c3");
    const auto r = run({"solve", "--prices", prices, "--riskfree", riskfree, "--constraint", "c3", "--out",
                        dir.string()});
    REQUIRE(r.code == 0);
    int solutions = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename().string().rfind("solution_", 0) == 0) ++solutions;
    }
    CHECK(solutions == 4);
    const auto j = json::parse(slurp(dir / "solution_mm_maxsharpe_c3.json"));
    CHECK(j["converged"] == true);
    CHECK(j["kkt_residual"].get<double>() <= 1e-6);
}

TEST_CASE("market exclusion holds in every emitted solution") {
    const auto dir = scratch("solve-c5");
    REQUIRE(run({"solve", "--prices", prices, "--riskfree", riskfree, "--constraint", "c5", "--format", "json",
                 "--out", dir.string()})
                .code == 0);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename().string().rfind("solution_", 0) != 0) continue;
        CHECK(json::parse(slurp(e.path()))["weights"]["KLCI"].get<double>() == 0.0);
    }
}

TEST_CASE("leverage cap holds in the emitted max-Sharpe weights") {
    const auto dir = scratch("solve-c1");
    REQUIRE(run({"solve", "--prices", prices, "--riskfree", riskfree, "--constraint", "c1", "--objective", "maxsharpe",
                 "--out", dir.string()})
                .code == 0);
    for (const char* model : {"mm", "im"}) {
        const auto j = json::parse(slurp(dir / (std::string("solution_") + model + "_maxsharpe_c1.json")));
        double gross = 0.0, total = 0.0;
        for (const auto& [ticker, w] : j["weights"].items()) {
            gross += std::abs(w.get<double>());
            total += w.get<double>();
        }
        CHECK(gross <= 2.0 + 1e-7);
        CHECK(std::abs(total - 1.0) <= 1e-7);
    }
}

TEST_CASE("two-asset frontier plot structure") {
    const auto dir = scratch("frontier-toy");
    spit(dir / "p.csv", two_asset_prices(60));
    const auto r = run({"frontier", "--prices", (dir / "p.csv").string(), "--market", "MKT", "--rf", "0.001",
                        "--constraint", "c3", "--grid", "20", "--cloud", "50", "--out", (dir / "out").string()});
    REQUIRE(r.code == 0);
    const auto svg = slurp(dir / "out" / "frontier_c3.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count_of(svg, "<polyline class=\"frontier") == 2);
    CHECK(count_of(svg, "<polyline class=\"cal") == 2);
}

TEST_CASE("seeded frontier runs are byte-identical") {
    const auto a = scratch("frontier-a");
    const auto b = scratch("frontier-b");
    for (const auto& dir : {a, b}) {
        REQUIRE(run({"frontier", "--prices", prices, "--riskfree", riskfree, "--constraint", "c4", "--grid", "15",
                     "--cloud", "200", "--seed", "9", "--out", dir.string()})
                    .code == 0);
    }
    for (const char* name : {"frontier_mm_c4.csv", "cal_im_c4.csv", "cloud_mm_c4.csv", "frontier_c4.svg",
                             "manifest.json"}) {
        CHECK(slurp(a / name) == slurp(b / name));
    }
    const auto c = scratch("frontier-c");
    REQUIRE(run({"frontier", "--prices", prices, "--riskfree", riskfree, "--constraint", "c4", "--grid", "15",
                 "--cloud", "200", "--seed", "10", "--out", c.string()})
                .code == 0);
    CHECK(slurp(a / "cloud_mm_c4.csv") != slurp(c / "cloud_mm_c4.csv"));
}

TEST_CASE("compare manifest and input hashes") {
    const auto dir = scratch("compare");
    const auto copy = dir / "prices.csv";
    fs::copy_file(prices, copy);
    REQUIRE(run({"compare", "--prices", copy.string(), "--riskfree", riskfree, "--out", (dir / "a").string()}).code ==
            0);
    const auto m1 = json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(m1["estimator_counts"]["MM"] == 77);
    CHECK(m1["estimator_counts"]["IM"] == 35);

    REQUIRE(run({"compare", "--prices", copy.string(), "--riskfree", riskfree, "--out", (dir / "b").string()}).code ==
            0);
    const auto m2 = json::parse(slurp(dir / "b" / "manifest.json"));
    CHECK(m1["inputs"]["prices"]["sha256"] == m2["inputs"]["prices"]["sha256"]);

    // Flip one digit of the last price.
    auto text = slurp(copy);
    const auto pos = text.find_last_of("0123456789");
    text[pos] = text[pos] == '9' ? '8' : static_cast<char>(text[pos] + 1);
    spit(copy, text);
    REQUIRE(run({"compare", "--prices", copy.string(), "--riskfree", riskfree, "--out", (dir / "c").string()}).code ==
            0);
    const auto m3 = json::parse(slurp(dir / "c" / "manifest.json"));
    CHECK(m1["inputs"]["prices"]["sha256"] != m3["inputs"]["prices"]["sha256"]);
    CHECK(m1["inputs"]["riskfree"]["sha256"] == m3["inputs"]["riskfree"]["sha256"]);
}

TEST_CASE("compare reports deltas against an expected directory") {
    const auto dir = scratch("compare-expected");
    const auto r = run({"compare", "--prices", prices, "--riskfree", riskfree, "--expected",
                        (fs::path(MVINDEX_DATA_DIR) / "expected").string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto deltas = slurp(dir / "comparison_deltas.csv");
    CHECK(deltas.rfind("constraint,model,objective,expected_table,", 0) == 0);
    CHECK(count_of(deltas, "\n") == 21);
    CHECK(json::parse(slurp(dir / "comparison.json")).contains("deltas"));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    CHECK(run({"solve", "--prices", (dir / "nope.csv").string(), "--rf", "0.001", "--out", dir.string()}).code ==
          mvindex::app::exit_input);
    CHECK(run({"solve", "--prices", prices, "--riskfree", riskfree, "--constraint", "c9", "--out", dir.string()})
              .code == mvindex::app::exit_input);
    spit(dir / "bad.csv", "date,A,KLCI\n2020-01-02,abc,1\n");
    const auto bad = run({"ingest", "--prices", (dir / "bad.csv").string(), "--rf", "0.001", "--out", dir.string()});
    CHECK(bad.code == mvindex::app::exit_input);
    CHECK(bad.err.find(":2:2") != std::string::npos);
    CHECK(run({"solve", "--prices", prices, "--riskfree", riskfree, "--constraint", "c2", "--box", "0.05", "--out",
               dir.string()})
              .code == mvindex::app::exit_infeasible);
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("config file with flag overrides and the output-directory variable") {
    const auto dir = scratch("config");
    spit(dir / "run.json", json{{"prices", prices}, {"riskfree", riskfree}, {"constraint", "c4"},
                                {"objective", "minvar"}, {"model", "mm"}, {"out", "from-config"}}
                               .dump());
    REQUIRE(run({"solve", "--config", (dir / "run.json").string(), "--model", "im"}).code == 0);
    CHECK(fs::exists(dir / "from-config" / "solution_im_minvar_c4.json"));
    CHECK_FALSE(fs::exists(dir / "from-config" / "solution_mm_minvar_c4.json"));

    spit(dir / "typo.json", R"({"constrant": "c4"})");
    CHECK(run({"solve", "--config", (dir / "typo.json").string()}).code == mvindex::app::exit_input);

    const auto env_dir = dir / "from-env";
    ::setenv("MVINDEX_OUTPUT_DIR", env_dir.c_str(), 1);
    const auto r = run({"ingest", "--prices", prices, "--riskfree", riskfree});
    ::unsetenv("MVINDEX_OUTPUT_DIR");
    CHECK(r.code == 0);
    CHECK(fs::exists(env_dir / "monthly_returns.csv"));
}

}  // TEST_SUITE
