#include "twoscale/report.hpp"
#include "twoscale/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace twoscale {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{
        "eps",        "h",           "lattice_spacing", "unknowns",      "wall_s",         "lambda_bar",
        "lambda0",    "r0",          "r1",              "r1_empirical",  "e0",             "e1",
        "e2",         "proj_range",  "proj_zero",       "osborn",        "theta_row",      "w0",
        "w1",         "h1",          "h1_zeroth",       "v2_grad",       "kbl_norm",       "psi_residual",
        "psi_orthogonality", "cluster_residual", "neumann_data_l2", "neumann_compatibility", "neumann_layer_l2",
        "n",          "lambda_eps",  "lambda_exact"};
    return cols;
}

double ReportRow::get(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? kNaN : it->second;
}

void ExpansionReport::fit_slope(const std::string& quantity) {
    std::vector<double> e, v;
    for (const auto& r : rows) {
        if (!r.converged) continue;
        e.push_back(r.get("eps"));
        v.push_back(r.get(quantity));
    }
    SlopeEntry s;
    s.quantity = quantity;
    try {
        s.fit = rate_fit(e, v);
        s.ok = true;
    } catch (const Error& ex) {
        s.error = ex.what();
    }
    slopes[quantity] = s;
}

double ExpansionReport::slope(const std::string& quantity) const {
    auto it = slopes.find(quantity);
    return it != slopes.end() && it->second.ok ? it->second.fit.slope : kNaN;
}

void ExpansionReport::assert_slope(const std::string& name, const std::string& a, const std::string& b, double bound) {
    Assertion as;
    as.name = name;
    std::ostringstream os;
    os << std::setprecision(4);
    auto entry = [&](const std::string& q) -> const SlopeEntry* {
        auto it = slopes.find(q);
        return it == slopes.end() ? nullptr : &it->second;
    };
    const SlopeEntry* sa = entry(a);
    const SlopeEntry* sb = b.empty() ? nullptr : entry(b);
    if (!sa || !sa->ok || (!b.empty() && (!sb || !sb->ok))) {
        as.inconclusive = true;
        os << "slope unavailable";
    } else {
        const double lhs = sa->fit.slope;
        const double rhs = (sb ? sb->fit.slope : 0.0) + bound;
        as.passed = lhs >= rhs;
        os << "slope(" << a << ") = " << lhs;
        if (sb) os << ", slope(" << b << ") = " << sb->fit.slope << ", margin " << bound;
        else os << ", floor " << bound;
        const double worst = std::max(sa->fit.max_residual, sb ? sb->fit.max_residual : 0.0);
        os << ", fit residual " << worst;
        if (worst > 0.5) {
            as.inconclusive = true;
            as.passed = false;
        }
    }
    as.detail = os.str();
    assertions.push_back(as);
}

void ExpansionReport::assert_value(const std::string& name, bool passed, const std::string& detail) {
    assertions.push_back({name, passed, false, detail});
}

int ExpansionReport::exit_code() const {
    bool inconclusive = false;
    for (const auto& a : assertions) {
        if (a.inconclusive) inconclusive = true;
        else if (!a.passed) return 2;
    }
    return inconclusive ? 3 : 0;
}

nlohmann::json to_json(const ExpansionReport& r) {
    using nlohmann::json;
    json j;
    j["name"] = r.name;
    j["kind"] = r.kind;
    j["columns"] = report_columns();
    json rows = json::array();
    for (const auto& row : r.rows) {
        json o = json::object();
        for (const auto& [k, v] : row.values) o[k] = number(v);
        o["converged"] = row.converged;
        rows.push_back(o);
    }
    j["rows"] = rows;
    json slopes = json::object();
    for (const auto& [k, s] : r.slopes) {
        if (s.ok)
            slopes[k] = {{"slope", s.fit.slope},
                         {"intercept", s.fit.intercept},
                         {"max_residual", s.fit.max_residual},
                         {"used", s.fit.used},
                         {"floored", s.fit.floored}};
        else
            slopes[k] = {{"error", s.error}};
    }
    j["slopes"] = slopes;
    json theta = json::array();
    for (const auto& t : r.theta) theta.push_back({{"method", t.method}, {"value", number(t.value)}, {"error", number(t.error)}});
    j["theta"] = theta;
    json as = json::array();
    for (const auto& a : r.assertions)
        as.push_back({{"name", a.name}, {"passed", a.passed}, {"inconclusive", a.inconclusive}, {"detail", a.detail}});
    j["assertions"] = as;
    j["meta"] = r.meta;
    return j;
}

void write_csv(const ExpansionReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("report: cannot write " + path);
    const auto& cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << ",converged\n";
    out << std::setprecision(12);
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out << ',';
            const double v = row.get(cols[i]);
            if (std::isfinite(v)) out << v;
        }
        out << ',' << (row.converged ? 1 : 0) << '\n';
    }
}

void write_report(const ExpansionReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_csv(r, dir + "/report.csv");
    std::ofstream out(dir + "/report.json");
    if (!out) throw Error("report: cannot write " + dir + "/report.json");
    out << to_json(r).dump(2) << '\n';
}

ExpansionReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("report: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("report: ") + e.what());
    }
    ExpansionReport r;
    r.name = j.value("name", "");
    r.kind = j.value("kind", "");
    for (const auto& o : j.at("rows")) {
        ReportRow row;
        for (auto it = o.begin(); it != o.end(); ++it) {
            if (it.key() == "converged") row.converged = it.value().get<bool>();
            else row.values[it.key()] = it.value().is_null() ? kNaN : it.value().get<double>();
        }
        r.rows.push_back(row);
    }
    const nlohmann::json slopes = j.value("slopes", nlohmann::json::object());
    for (const auto& [k, o] : slopes.items()) {
        SlopeEntry s;
        s.quantity = k;
        if (o.contains("slope")) {
            s.ok = true;
            s.fit.slope = o.at("slope").get<double>();
            s.fit.intercept = o.at("intercept").get<double>();
            s.fit.max_residual = o.at("max_residual").get<double>();
            s.fit.used = o.at("used").get<int>();
            s.fit.floored = o.at("floored").get<std::vector<int>>();
        } else {
            s.error = o.value("error", "");
        }
        r.slopes[k] = s;
    }
    for (const auto& t : j.value("theta", nlohmann::json::array()))
        r.theta.push_back({t.at("method").get<std::string>(), t.at("value").is_null() ? kNaN : t.at("value").get<double>(),
                           t.at("error").is_null() ? kNaN : t.at("error").get<double>()});
    for (const auto& a : j.value("assertions", nlohmann::json::array()))
        r.assertions.push_back({a.at("name").get<std::string>(), a.at("passed").get<bool>(),
                                a.at("inconclusive").get<bool>(), a.at("detail").get<std::string>()});
    r.meta = j.value("meta", nlohmann::json::object());
    return r;
}

}  // namespace twoscale
