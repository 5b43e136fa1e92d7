#pragma once

#include "twoscale/config.hpp"
#include "twoscale/rate_fit.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace twoscale {

// Column order of report.csv; cells without a value are left empty.
const std::vector<std::string>& report_columns();

struct ReportRow {
    std::map<std::string, double> values;
    bool converged = true;
    double get(const std::string& key) const;  // NaN when absent
};

struct SlopeEntry {
    std::string quantity;
    RateFit fit;
    bool ok = false;  // false when the fit could not be formed
    std::string error;
};

struct ThetaEstimate {
    std::string method;  // "pairing" or "empirical"
    double value = 0.0;
    double error = 0.0;
};

// One line of the built-in assertions; inconclusive when a slope fit is too poor to judge.
struct Assertion {
    std::string name;
    bool passed = false;
    bool inconclusive = false;
    std::string detail;
};

struct ExpansionReport {
    std::string name;
    std::string kind;  // sweep-dirichlet, sweep-neumann, gradient, h1, oracle1d, correctors
    std::vector<ReportRow> rows;
    std::map<std::string, SlopeEntry> slopes;
    std::vector<ThetaEstimate> theta;
    std::vector<Assertion> assertions;
    nlohmann::json meta = nlohmann::json::object();

    // Fits log(value) against log(eps) over converged rows.
    void fit_slope(const std::string& quantity);
    double slope(const std::string& quantity) const;  // NaN when unavailable
    // Slope assertion a ≥ b + margin (b may be empty for an absolute floor);
    // inconclusive when a fit residual exceeds 0.5 in log units.
    void assert_slope(const std::string& name, const std::string& a, const std::string& b, double bound);
    void assert_value(const std::string& name, bool passed, const std::string& detail);
    // 0 all passed, 2 a failed assertion, 3 inconclusive only.
    int exit_code() const;
};

nlohmann::json to_json(const ExpansionReport& report);
void write_csv(const ExpansionReport& report, const std::string& path);
// report.csv and report.json under dir (created if needed).
void write_report(const ExpansionReport& report, const std::string& dir);
ExpansionReport read_report_json(const std::string& path);

}  // namespace twoscale
