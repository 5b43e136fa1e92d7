#include "twoscale/config.hpp"
#include "twoscale/error.hpp"
#include "twoscale/rate_fit.hpp"
#include "twoscale/report.hpp"
#include "twoscale/sweeps.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace twoscale;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExpansionReport sample_report() {
    ExpansionReport r;
    r.name = "sample";
    r.kind = "sweep-dirichlet";
    for (double e : {0.125, 0.0625, 0.03125}) {
        ReportRow row;
        row.values["eps"] = e;
        row.values["r0"] = 3.0 * e;
        row.values["r1"] = 2.0 * e * e;
        r.rows.push_back(row);
    }
    r.fit_slope("r0");
    r.fit_slope("r1");
    r.theta.push_back({"pairing", 0.1, 0.01});
    return r;
}

}  // namespace

TEST(RateFit, ExactPowerLaw) {
    const auto f = rate_fit({0.1, 0.05, 0.025}, {0.3, 0.075, 0.01875});
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(30.0), 1e-12);
    EXPECT_LE(f.max_residual, 1e-12);
    EXPECT_EQ(f.used, 3);
}

TEST(RateFit, FloorsNonpositiveValues) {
    const auto f = rate_fit({0.1, 0.05, 0.025, 0.0125}, {0.1, 0.05, 0.0, 0.0125});
    EXPECT_EQ(f.floored, std::vector<int>{2});
    EXPECT_NEAR(f.slope, 1.0, 1e-12);
    EXPECT_THROW(rate_fit({0.1, 0.05, 0.025}, {0.1, -1.0, 0.0}), Error);
    EXPECT_THROW(rate_fit({0.1, 0.05}, {0.1, 0.05}), Error);
}

TEST(RateFit, TwoPointSlope) {
    EXPECT_NEAR(two_point_slope(0.1, 0.01, 0.05, 0.0025), 2.0, 1e-12);
    EXPECT_TRUE(std::isnan(two_point_slope(0.1, 0.0, 0.05, 0.1)));
}

TEST(EmpiricalTheta, RecoversLinearCoefficient) {
    std::vector<double> eps{0.125, 0.0625, 0.03125}, gap;
    for (double e : eps) gap.push_back(0.3 * e + 2.0 * e * e);
    const auto t = empirical_theta(eps, gap);
    EXPECT_EQ(t.method, "empirical");
    EXPECT_NEAR(t.value, 0.3, 1e-10);
    EXPECT_GT(t.error, 0.0);  // the p = 1.5 refit moves θ
}

TEST(Config, ParsesAndValidates) {
    const auto c = parse_config(R"(
name = "t"
eps = [0.125, 0.0625, 0.03125]
coefficient = { family = "trig2d", params = [1.0] }
[spectrum]
target = 11.25
)");
    EXPECT_EQ(c.name, "t");
    EXPECT_EQ(c.eps.size(), 3u);
    EXPECT_DOUBLE_EQ(c.target, 11.25);
    EXPECT_EQ(c.kbl_method, "harmonic");
}

TEST(Config, RejectsInvalidInput) {
    const std::string base = "coefficient = { family = \"trig2d\", params = [1.0] }\n[spectrum]\ntarget = 11.25\n";
    EXPECT_THROW(parse_config("eps = [0.0625, 0.125]\n" + base), ConfigError);
    EXPECT_THROW(parse_config("eps = [0.125]\nresolution = 0\n" + base), ConfigError);
    EXPECT_THROW(parse_config("eps = [0.125]\ncell_grid = 48\n" + base), ConfigError);
    EXPECT_THROW(parse_config("eps = [0.125]\nboundary = \"robin\"\n" + base), ConfigError);
    EXPECT_THROW(parse_config("eps = [0.125]\n" + base + "[kbl]\nmethod = \"magic\"\n"), ConfigError);
    EXPECT_THROW(parse_config("eps = [0.001]\n" + base), ConfigError);  // over budget
    EXPECT_THROW(parse_config("eps = [0.125]\ncoefficient = { family = \"trig2d\", params = [3.0] }\n"
                              "[spectrum]\ntarget = 11.25\n"),
                 ConfigError);
    EXPECT_THROW(parse_config("eps = [0.125"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/file.toml"), ConfigError);
}

TEST(Report, SlopesAndAssertions) {
    auto r = sample_report();
    EXPECT_NEAR(r.slope("r0"), 1.0, 1e-12);
    EXPECT_NEAR(r.slope("r1"), 2.0, 1e-12);
    EXPECT_TRUE(std::isnan(r.slope("missing")));
    r.assert_slope("r1 beats r0", "r1", "r0", 0.15);
    EXPECT_TRUE(r.assertions.back().passed);
    EXPECT_EQ(r.exit_code(), 0);
    r.assert_value("forced", false, "x");
    EXPECT_EQ(r.exit_code(), 2);
}

TEST(Report, CsvIsDeterministicAndJsonRoundTrips) {
    const auto r = sample_report();
    const auto dir = std::filesystem::temp_directory_path() / "twoscale_report_test";
    std::filesystem::remove_all(dir);
    write_report(r, (dir / "a").string());
    write_report(r, (dir / "b").string());
    const std::string a = slurp(dir / "a" / "report.csv");
    EXPECT_EQ(a, slurp(dir / "b" / "report.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')).substr(0, report_columns().front().size()), report_columns().front());
    const auto back = read_report_json((dir / "a" / "report.json").string());
    EXPECT_EQ(back.name, r.name);
    EXPECT_EQ(back.rows.size(), 3u);
    EXPECT_DOUBLE_EQ(back.rows[1].get("r0"), r.rows[1].get("r0"));
    EXPECT_NEAR(back.slope("r1"), 2.0, 1e-12);
    std::filesystem::remove_all(dir);
}

TEST(Harness, DistanceWeightIsOneAtCenter) {
    EXPECT_DOUBLE_EQ(Domain::disk(1.0).distance(Vec2::Zero()), 1.0);
}
