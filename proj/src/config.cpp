#include "twoscale/config.hpp"
#include "twoscale/error.hpp"

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace twoscale {

namespace {

template <class T>
T get_or(const toml::node_view<const toml::node>& v, T fallback) {
    if (!v) return fallback;
    if constexpr (std::is_same_v<T, double>) {
        if (auto x = v.value<double>()) return *x;
    } else if constexpr (std::is_integral_v<T>) {
        if (auto x = v.value<int64_t>()) return static_cast<T>(*x);
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto x = v.value<bool>()) return *x;
    } else {
        if (auto x = v.value<std::string>()) return *x;
    }
    throw ConfigError("config: wrong value type");
}

std::vector<double> number_array(const toml::node_view<const toml::node>& v, const char* what) {
    std::vector<double> out;
    const auto* arr = v.as_array();
    if (!arr) throw ConfigError(std::string("config: ") + what + " must be an array");
    for (const auto& e : *arr) {
        auto x = e.value<double>();
        if (!x) throw ConfigError(std::string("config: ") + what + " must hold numbers");
        out.push_back(*x);
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (eps.empty()) throw ConfigError("config: eps list is empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0)) throw ConfigError("config: eps values must be positive");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("config: eps list must be strictly decreasing");
    }
    if (resolution < 1) throw ConfigError("config: resolution must be positive");
    if (cell_grid < 4 || (cell_grid & (cell_grid - 1)) != 0) throw ConfigError("config: cell_grid must be a power of two >= 4");
    if (!(target > 0.0)) throw ConfigError("config: spectrum.target must be positive");
    if (multiplicity < 1) throw ConfigError("config: spectrum.multiplicity must be >= 1");
    if (!(window > 0.0 && window < 1.0)) throw ConfigError("config: spectrum.window must lie in (0, 1)");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    if (kbl_method != "harmonic" && kbl_method != "finest") throw ConfigError("config: kbl.method must be harmonic or finest");
    if (kbl_degree < 0 || kbl_degree > 30) throw ConfigError("config: kbl.degree must lie in [0, 30]");
    if (!(kbl_interior >= 0.0 && kbl_interior < domain.min_radius())) throw ConfigError("config: kbl.interior must lie in [0, min radius)");
    if (domain.kind == Domain::Kind::Interval) throw ConfigError("config: sweeps run on disk or ellipse domains");
    field();  // rejects unknown families and non-elliptic parameters
    // Budget: lattice nodes ≈ area / spacing².
    const double area = std::acos(-1.0) * domain.a * domain.b;
    for (double e : eps) {
        const double spacing = e / resolution;
        if (spacing > domain.min_radius() / 4.0) throw ConfigError("config: eps too large for the domain");
        if (area / (spacing * spacing) > static_cast<double>(max_unknowns)) {
            std::ostringstream os;
            os << "config: eps = " << e << " needs about " << static_cast<long>(area / (spacing * spacing))
               << " unknowns, above max_unknowns = " << max_unknowns;
            throw ConfigError(os.str());
        }
    }
}

ExperimentConfig parse_config(const std::string& text) {
    toml::table tbl;
    try {
        tbl = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(os.str());
    }
    const toml::table& t = tbl;
    ExperimentConfig c;
    c.name = get_or<std::string>(t["name"], c.name);
    const std::string bc = get_or<std::string>(t["boundary"], "dirichlet");
    if (bc == "dirichlet") c.bc = BoundaryCondition::Dirichlet;
    else if (bc == "neumann") c.bc = BoundaryCondition::Neumann;
    else throw ConfigError("config: boundary must be dirichlet or neumann");
    if (t["eps"]) c.eps = number_array(t["eps"], "eps");
    c.resolution = get_or<int>(t["resolution"], c.resolution);
    c.cell_grid = get_or<int>(t["cell_grid"], c.cell_grid);
    c.seed = get_or<std::uint64_t>(t["seed"], c.seed);
    c.workers = get_or<int>(t["workers"], c.workers);
    c.max_unknowns = get_or<long>(t["max_unknowns"], c.max_unknowns);

    if (t["coefficient"]) {
        c.family = get_or<std::string>(t["coefficient"]["family"], c.family);
        c.params = t["coefficient"]["params"] ? number_array(t["coefficient"]["params"], "coefficient.params")
                                              : std::vector<double>{};
    }
    if (t["domain"]) {
        const std::string kind = get_or<std::string>(t["domain"]["kind"], "disk");
        const double a = get_or<double>(t["domain"]["a"], 1.0);
        const double b = get_or<double>(t["domain"]["b"], a);
        if (kind == "disk") c.domain = Domain::disk(a);
        else if (kind == "ellipse") c.domain = Domain::ellipse(a, b);
        else throw ConfigError("config: domain.kind must be disk or ellipse");
        if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("config: domain axes must be positive");
    }
    c.target = get_or<double>(t["spectrum"]["target"], c.target);
    c.multiplicity = get_or<int>(t["spectrum"]["multiplicity"], c.multiplicity);
    c.window = get_or<double>(t["spectrum"]["window"], c.window);
    c.cell_tol = get_or<double>(t["tolerances"]["cell"], c.cell_tol);
    c.eigen_tol = get_or<double>(t["tolerances"]["eigen"], c.eigen_tol);
    c.source_f = get_or<double>(t["source"]["f"], c.source_f);
    c.write_fields = get_or<bool>(t["output"]["fields"], c.write_fields);
    c.kbl_method = get_or<std::string>(t["kbl"]["method"], c.kbl_method);
    c.kbl_degree = get_or<int>(t["kbl"]["degree"], c.kbl_degree);
    c.kbl_interior = get_or<double>(t["kbl"]["interior"], c.kbl_interior);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace twoscale
