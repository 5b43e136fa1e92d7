#include "twoscale/error.hpp"
#include "twoscale/sweeps.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

using namespace twoscale;

namespace {

void print_summary(const ExpansionReport& rep) {
    std::cout << rep.kind << " '" << rep.name << "': " << rep.rows.size() << " rows\n";
    for (const auto& [q, s] : rep.slopes)
        if (s.ok) std::cout << "  slope(" << q << ") = " << s.fit.slope << "  (fit residual " << s.fit.max_residual << ")\n";
    for (const auto& t : rep.theta) std::cout << "  theta[" << t.method << "] = " << t.value << " +- " << t.error << "\n";
    for (const auto& a : rep.assertions)
        std::cout << "  " << (a.inconclusive ? "INCONCLUSIVE" : a.passed ? "PASS" : "FAIL") << "  " << a.name << "  ("
                  << a.detail << ")\n";
}

std::vector<int> cells_from_eps(const std::vector<double>& eps) {
    std::vector<int> ns;
    for (double e : eps) {
        const long n = std::lround(1.0 / e);
        if (n < 1 || std::abs(n * e - 1.0) > 1e-9) throw ConfigError("oracle1d: every eps must be 1/n");
        ns.push_back(static_cast<int>(n));
    }
    return ns;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-scale expansion experiments for periodic homogenization eigenproblems"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    int workers = 0;
    const std::vector<std::string> names{"correctors", "oracle1d", "sweep-dirichlet", "sweep-neumann",
                                         "gradient",   "h1",       "report"};
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n);
        sub->add_option("--config", config_path, n == "report" ? "report.json to re-emit" : "TOML experiment file")
            ->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--workers", workers, "override the configured worker count");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        ExpansionReport rep;
        if (cmd == "report") {
            rep = read_report_json(config_path);
        } else {
            ExperimentConfig cfg = load_config(config_path);
            if (workers > 0) cfg.workers = workers;
            SweepOptions opt;
            if (cfg.write_fields) opt.fields_dir = (std::filesystem::path(out_dir) / "fields").string();
            if (cmd == "correctors") {
                rep = correctors_report(cfg);
            } else if (cmd == "oracle1d") {
                if (cfg.family != "trig1d" || cfg.params.size() != 1)
                    throw ConfigError("oracle1d: coefficient must be trig1d with one phase parameter");
                rep = oracle1d_report(cfg.params[0], cells_from_eps(cfg.eps));
                rep.name = cfg.name;
            } else if (cmd == "sweep-dirichlet") {
                rep = sweep_dirichlet(cfg, opt);
            } else if (cmd == "gradient") {
                if (cfg.multiplicity != 1) throw ConfigError("gradient: multiplicity must be 1");
                opt.gradient = true;
                opt.projection_checks = false;
                rep = sweep_dirichlet(cfg, opt);
                rep.kind = "gradient";
            } else if (cmd == "sweep-neumann") {
                rep = sweep_neumann(cfg, opt);
            } else {
                rep = h1_sweep(cfg);
            }
        }
        write_report(rep, out_dir);
        print_summary(rep);
        return rep.exit_code();
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
