// Command line front end: run scenarios, compare solvers, sweep parameters.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lambdasim/lambdasim.hpp"

namespace fs = std::filesystem;
using namespace lambdasim;

namespace {

Scenario load_scenario(const std::string& spec) {
    const fs::path path(spec);
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ScenarioError("cannot open scenario file " + spec);
        json j;
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw ScenarioError("scenario file " + spec + ": " + e.what());
        }
        Scenario sc = scenario_from_json(j);
        if (sc.name.empty()) sc.name = path.stem().string();
        return sc;
    }
    return builtin_scenario(spec);
}

// A solver spec is either a bare type name ("full_numeric", "grwa", ...) or
// an inline JSON object matching the scenario's "solver" section.
Scenario::Solver parse_solver_spec(const Scenario& base, const std::string& spec) {
    json sj;
    if (!spec.empty() && spec.front() == '{') {
        try {
            sj = json::parse(spec);
        } catch (const json::parse_error& e) {
            throw ScenarioError(std::string("solver spec: ") + e.what());
        }
    } else {
        sj = json{{"type", spec}};
    }
    json jb = to_json(base);
    jb["solver"] = sj;
    return scenario_from_json(jb).solver;
}

std::string resolve_out_dir(const std::string& cli_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("LAMBDASIM_OUT_DIR"); env && *env)
        return env;
    return "out";
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

int fail(const std::string& context, const std::exception& e) {
    const char* type = "runtime";
    if (dynamic_cast<const ScenarioError*>(&e)) type = "scenario";
    else if (dynamic_cast<const SingularityError*>(&e)) type = "singularity";
    else if (dynamic_cast<const IntegratorError*>(&e)) type = "integrator";
    else if (dynamic_cast<const std::invalid_argument*>(&e)) type = "invalid_argument";
    else if (dynamic_cast<const std::domain_error*>(&e)) type = "domain_error";
    json j;
    j["error"] = {{"type", type}, {"message", e.what()}, {"context", context}};
    std::cerr << j.dump() << "\n";
    return 1;
}

int cmd_simulate(const std::string& scenario_spec, const std::string& out_opt) {
    try {
        const Scenario sc = load_scenario(scenario_spec);
        const RunResult res = run_scenario(sc);
        const fs::path dir = resolve_out_dir(out_opt);
        write_outputs(res, dir);
        print_warnings(res.warnings);
        std::cout << "scenario " << res.resolved.name << ": "
                  << res.pop_t.size() << " samples over "
                  << format_g12(res.resolved.t_end_cycles) << " cycles\n";
        std::cout << "resonance: P = " << res.resonance.order_p
                  << ", dynamic detuning = "
                  << format_g12(res.resonance.dynamic_detuning) << "\n";
        if (res.peaks) {
            std::cout << "spectrum peaks (omega/omega0, relative power):\n";
            std::size_t shown = 0;
            for (const SpectrumPeak& pk : *res.peaks) {
                if (++shown > 8) break;
                std::cout << "  " << format_g12(pk.omega) << "  "
                          << format_g12(pk.power) << "\n";
            }
        }
        std::cout << "outputs written to " << dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail("simulate", e);
    }
}

void print_metric(const char* label, const ErrorMetric& m) {
    std::cout << "  " << label << ": rms = " << format_g12(m.rms)
              << ", sup = " << format_g12(m.sup) << "\n";
}

int cmd_compare(const std::string& scenario_spec, const std::string& a_spec,
                const std::string& b_spec, const std::string& out_opt) {
    try {
        const Scenario base = load_scenario(scenario_spec);
        Scenario sa = base;
        sa.solver = parse_solver_spec(base, a_spec);
        Scenario sb = base;
        sb.solver = parse_solver_spec(base, b_spec);

        const RunResult ra = run_scenario(sa);
        const RunResult rb = run_scenario(sb);
        const ComparisonReport rep = compare_runs(ra, rb);

        const fs::path dir = resolve_out_dir(out_opt);
        fs::create_directories(dir);
        {
            std::ofstream os(dir / "report.json", std::ios::binary);
            if (!os) throw std::runtime_error("cannot write report.json");
            os << rep.to_json().dump(2) << "\n";
        }
        write_populations_csv(ra, dir / "populations_a.csv",
                              to_json(ra.resolved).dump());
        write_populations_csv(rb, dir / "populations_b.csv",
                              to_json(rb.resolved).dump());

        print_warnings(rep.warnings);
        std::cout << "compared " << a_spec << " against " << b_spec << " on "
                  << rep.n_samples << " samples:\n";
        print_metric("p1", rep.p1);
        print_metric("p3", rep.p3);
        if (rep.re_b1) print_metric("re_b1", *rep.re_b1);
        if (rep.im_b1) print_metric("im_b1", *rep.im_b1);
        if (rep.peak_heights) {
            print_metric("peak heights", *rep.peak_heights);
            std::cout << "  matched peaks: " << rep.matched_peaks << "\n";
        }
        std::cout << "report written to " << (dir / "report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        return fail("compare", e);
    }
}

int cmd_sweep(const std::string& scenario_spec, const std::string& axis,
              const std::vector<double>& values, const std::string& cmp_spec,
              const std::string& out_opt) {
    try {
        const Scenario base = load_scenario(scenario_spec);
        std::optional<Scenario::Solver> cmp;
        if (!cmp_spec.empty()) cmp = parse_solver_spec(base, cmp_spec);

        const fs::path dir = resolve_out_dir(out_opt);
        const std::vector<SweepRow> rows = run_sweep(base, axis, values, cmp, dir);

        std::size_t ok = 0;
        for (const SweepRow& r : rows) {
            if (r.status == "ok") {
                ++ok;
                std::cout << axis << " = " << format_g12(r.value)
                          << ": max p2 = " << format_g12(r.max_p2);
                if (cmp)
                    std::cout << ", rms p3 = " << format_g12(r.rms_p3);
                std::cout << "\n";
            } else {
                std::cerr << "warning: " << axis << " = " << format_g12(r.value)
                          << " failed: " << r.message << "\n";
            }
        }
        std::cout << "summary written to "
                  << (dir / "sweep_summary.csv").string() << "\n";
        if (ok == 0)
            throw std::runtime_error("every sweep value failed");
        return 0;
    } catch (const std::exception& e) {
        return fail("sweep", e);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-level lambda system in a low-frequency pulse: "
                 "numerical dynamics, closed-form solutions, scattering spectra"};
    app.require_subcommand(0, 1);

    std::string print_name;
    app.add_option("--print-scenario", print_name,
                   "Print a built-in scenario as JSON and exit");

    std::string sim_scenario, sim_out;
    CLI::App* sim = app.add_subcommand("simulate", "Run one scenario");
    sim->add_option("--scenario", sim_scenario,
                    "Scenario JSON file or built-in name")->required();
    sim->add_option("--out", sim_out, "Output directory");

    std::string cmp_scenario, cmp_a, cmp_b, cmp_out;
    CLI::App* cmp = app.add_subcommand("compare",
                                       "Run two solvers on one scenario");
    cmp->add_option("--scenario", cmp_scenario,
                    "Scenario JSON file or built-in name")->required();
    cmp->add_option("--a", cmp_a, "First solver (type name or JSON)")->required();
    cmp->add_option("--b", cmp_b, "Second solver (type name or JSON)")->required();
    cmp->add_option("--out", cmp_out, "Output directory");

    std::string sw_scenario, sw_axis, sw_cmp, sw_out;
    std::vector<double> sw_values;
    CLI::App* sw = app.add_subcommand("sweep", "Repeat a scenario along one axis");
    sw->add_option("--scenario", sw_scenario,
                   "Scenario JSON file or built-in name")->required();
    sw->add_option("--axis", sw_axis,
                   "Scenario field path (e.g. params.omega21) or field_scale")
        ->required();
    sw->add_option("--values", sw_values, "Axis values")
        ->required()
        ->delimiter(',');
    sw->add_option("--compare-with", sw_cmp,
                   "Reference solver for error metrics (type name or JSON)");
    sw->add_option("--out", sw_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (!print_name.empty()) {
        try {
            std::cout << to_json(builtin_scenario(print_name)).dump(2) << "\n";
            return 0;
        } catch (const std::exception& e) {
            return fail("print-scenario", e);
        }
    }

    if (sim->parsed()) return cmd_simulate(sim_scenario, sim_out);
    if (cmp->parsed()) return cmd_compare(cmp_scenario, cmp_a, cmp_b, cmp_out);
    if (sw->parsed())
        return cmd_sweep(sw_scenario, sw_axis, sw_values, sw_cmp, sw_out);

    std::cout << app.help();
    return 0;
}
