#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lambdasim/analytic.hpp"
#include "lambdasim/effective.hpp"
#include "lambdasim/errors.hpp"
#include "lambdasim/scenario.hpp"
#include "lambdasim/spectrum.hpp"
#include "lambdasim/tdse.hpp"

namespace lambdasim {

// Everything one scenario run produces. Views that a solver does not have
// stay empty: the ratio solver has no amplitude phases, analytic solvers
// have no intermediate-state dynamics beyond the adiabatic b2.
struct RunResult {
    Scenario resolved;
    ResonanceInfo resonance;
    std::vector<std::string> warnings;

    std::optional<TimeSeries<AmplitudeState>> amplitudes;
    std::optional<TimeSeries<RatioState>> ratios;
    std::optional<TimeSeries<TwoStateAmplitudes>> two_state;
    std::optional<RiccatiSolution> riccati;

    std::vector<double> pop_t;
    std::vector<double> pop1, pop2, pop3;

    std::optional<DipoleSeries> dipole;
    std::optional<SpectrumData> spectrum;
    std::optional<std::vector<SpectrumPeak>> peaks;

    bool wants(OutputKind k) const {
        return std::find(resolved.outputs.begin(), resolved.outputs.end(), k) !=
               resolved.outputs.end();
    }
};

namespace detail {

inline CouplingMode coupling_from_scenario(const Scenario::Coupling& c,
                                           const ResonanceInfo& res) {
    CouplingMode m;
    m.kind = c.kind;
    m.use_exact_alpha = c.use_exact_alpha;
    m.n_max = c.n_max;
    m.order_p = c.order_p.value_or(res.order_p);
    m.with_phase_factor = c.with_phase_factor;
    return m;
}

inline DipoleSeries dipole_from_ratios(const TimeSeries<RatioState>& series,
                                       const SystemParams& p) {
    DipoleSeries dip;
    dip.t_cycles = series.t_cycles;
    dip.samples_per_cycle = series.samples_per_cycle;
    dip.d.reserve(series.size());
    for (const RatioState& s : series.samples) {
        const double p1 = s.p1();
        const double d12 = 2.0 * p.rabi_omega * p1 * std::real(s.r);
        const double d23 = 2.0 * p.rabi_m * p1 * std::real(std::conj(s.r) * s.rho);
        dip.d.push_back(d12 + d23);
    }
    return dip;
}

} // namespace detail

// Runs one scenario end to end: resolve, integrate with the requested
// solver, derive populations, and (when requested) dipole, spectrum and
// peak list. Warnings collect everything non-fatal: validation notes,
// applicability ratios above 0.1, Riccati validity flags.
inline RunResult run_scenario(const Scenario& input) {
    RunResult out;
    out.resolved = resolve(input);
    const Scenario& sc = out.resolved;
    const SystemParams p = sc.system_params();
    const PulseEnvelope env = sc.pulse_envelope();

    out.warnings = p.validate();
    out.resonance = detect_resonance(p);
    if (out.resonance.ambiguous)
        out.warnings.push_back(
            "resonance: midpoint between two even orders, picked P = " +
            std::to_string(out.resonance.order_p));

    const double t_end = sc.t_end_cycles;
    const int spc = sc.numeric.steps_per_cycle;
    const int sampc = sc.numeric.samples_per_cycle;

    switch (sc.solver.type) {
    case SolverType::full_numeric:
        out.amplitudes = integrate_full(p, env, t_end, spc, sampc,
                                        sc.numeric.halving_check);
        break;
    case SolverType::ratio_numeric:
        out.ratios = integrate_ratios(p, env, t_end, spc, sampc,
                                      sc.numeric.ratio_blowup_threshold);
        break;
    case SolverType::two_state_numeric: {
        const CouplingMode mode =
            detail::coupling_from_scenario(sc.solver.coupling, out.resonance);
        out.two_state = integrate_two_state(p, env, t_end, mode, spc, sampc);
        out.amplitudes = reconstruct_amplitudes(p, env, *out.two_state);
        if (mode.kind == CouplingMode::Kind::slow_only) {
            for (auto& w : applicability_check(p, env, mode.order_p).warnings())
                out.warnings.push_back(w);
        }
        break;
    }
    case SolverType::riccati_analytic: {
        const CouplingMode mode =
            detail::coupling_from_scenario(sc.solver.coupling, out.resonance);
        out.riccati = riccati_solve(p, env, t_end, mode, spc, sampc);
        out.amplitudes = amplitudes_from_riccati(*out.riccati, p, env,
                                                 sc.solver.phase_variant);
        if (out.riccati->first_flagged_t_cycles)
            out.warnings.push_back(
                "riccati: validity measure exceeded 0.1 from t = " +
                format_g12(*out.riccati->first_flagged_t_cycles) +
                " cycles (max " + format_g12(out.riccati->max_validity) + ")");
        for (double t_sing : out.riccati->singularity_times_cycles)
            out.warnings.push_back(
                "riccati: tan singularity (full 1->3 transfer) near t = " +
                format_g12(t_sing) + " cycles");
        break;
    }
    case SolverType::grwa: {
        const int order = *sc.solver.order_p;
        out.amplitudes = grwa_series(p, env, t_end, order, sc.solver.rabi_form,
                                     sc.solver.phase_variant, spc, sampc);
        for (auto& w : applicability_check(p, env, order).warnings())
            out.warnings.push_back(w);
        break;
    }
    case SolverType::floquet: {
        const int order = *sc.solver.order_p;
        out.amplitudes = floquet_series(p, env, t_end, order, spc, sampc);
        for (auto& w : applicability_check(p, env, order).warnings())
            out.warnings.push_back(w);
        break;
    }
    }

    if (out.amplitudes) {
        out.pop_t = out.amplitudes->t_cycles;
        for (const AmplitudeState& s : out.amplitudes->samples) {
            out.pop1.push_back(std::norm(s.b1));
            out.pop2.push_back(std::norm(s.b2));
            out.pop3.push_back(std::norm(s.b3));
        }
    } else if (out.ratios) {
        out.pop_t = out.ratios->t_cycles;
        for (const RatioState& s : out.ratios->samples) {
            const double p1 = s.p1();
            out.pop1.push_back(p1);
            out.pop2.push_back(std::norm(s.r) * p1);
            out.pop3.push_back(std::norm(s.rho) * p1);
        }
    }

    const bool needs_dipole = out.wants(OutputKind::dipole) ||
                              out.wants(OutputKind::spectrum) ||
                              out.wants(OutputKind::peaks);
    if (needs_dipole) {
        out.dipole = out.amplitudes ? induced_dipole(*out.amplitudes, p)
                                    : detail::dipole_from_ratios(*out.ratios, p);
    }
    if (out.dipole &&
        (out.wants(OutputKind::spectrum) || out.wants(OutputKind::peaks))) {
        out.spectrum = coherent_spectrum(*out.dipole, sc.spectrum.omega_max,
                                         sc.spectrum.points_per_omega0,
                                         sc.spectrum.window_start_cycles,
                                         sc.spectrum.window_end_cycles);
        if (out.wants(OutputKind::peaks))
            out.peaks = find_peaks(*out.spectrum, sc.spectrum.peak_min_relative_height,
                                   sc.spectrum.peak_min_separation);
    }
    return out;
}

namespace detail {

template <class RowFn>
void write_csv_file(const std::filesystem::path& path, const std::string& comment,
                    const std::vector<std::string>& columns, std::size_t n_rows,
                    RowFn row) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_csv(os, comment, columns, n_rows, row);
}

} // namespace detail

inline void write_populations_csv(const RunResult& res,
                                  const std::filesystem::path& file,
                                  const std::string& comment) {
    detail::write_csv_file(file, comment, {"t_cycles", "p1", "p2", "p3"},
                           res.pop_t.size(), [&res](std::size_t i) {
                               return std::vector<double>{res.pop_t[i], res.pop1[i],
                                                          res.pop2[i], res.pop3[i]};
                           });
}

// Writes every requested dataset of a finished run into dir. Each CSV gets
// a single '#' header line carrying the resolved scenario as one-line JSON,
// which also lands in scenario_resolved.json.
inline void write_outputs(const RunResult& res, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const json resolved_json = to_json(res.resolved);
    const std::string comment = resolved_json.dump();

    {
        std::ofstream os(dir / "scenario_resolved.json", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write scenario_resolved.json");
        os << resolved_json.dump(2) << "\n";
    }

    if (res.wants(OutputKind::amplitudes)) {
        if (res.amplitudes) {
            const auto& a = *res.amplitudes;
            detail::write_csv_file(
                dir / "amplitudes.csv", comment,
                {"t_cycles", "re_b1", "im_b1", "re_b2", "im_b2", "re_b3", "im_b3"},
                a.size(), [&a](std::size_t i) {
                    const AmplitudeState& s = a.samples[i];
                    return std::vector<double>{a.t_cycles[i],   s.b1.real(),
                                               s.b1.imag(),     s.b2.real(),
                                               s.b2.imag(),     s.b3.real(),
                                               s.b3.imag()};
                });
        } else if (res.ratios) {
            const auto& r = *res.ratios;
            detail::write_csv_file(
                dir / "amplitudes.csv", comment,
                {"t_cycles", "re_r", "im_r", "re_rho", "im_rho"}, r.size(),
                [&r](std::size_t i) {
                    const RatioState& s = r.samples[i];
                    return std::vector<double>{r.t_cycles[i], s.r.real(), s.r.imag(),
                                               s.rho.real(), s.rho.imag()};
                });
        }
        if (res.two_state && res.amplitudes) {
            const auto& ts = *res.two_state;
            const auto& a = *res.amplitudes;
            detail::write_csv_file(
                dir / "two_state.csv", comment,
                {"t_cycles", "re_u", "im_u", "re_v", "im_v", "re_b1", "im_b1",
                 "re_b3", "im_b3"},
                ts.size(), [&ts, &a](std::size_t i) {
                    const TwoStateAmplitudes& s = ts.samples[i];
                    const AmplitudeState& b = a.samples[i];
                    return std::vector<double>{ts.t_cycles[i], s.u.real(), s.u.imag(),
                                               s.v.real(),     s.v.imag(), b.b1.real(),
                                               b.b1.imag(),    b.b3.real(),
                                               b.b3.imag()};
                });
        }
        if (res.riccati) {
            const auto& rc = *res.riccati;
            detail::write_csv_file(
                dir / "riccati.csv", comment,
                {"t_cycles", "re_x0", "im_x0", "x1", "re_x", "im_x", "re_beta",
                 "im_beta", "validity"},
                rc.size(), [&rc](std::size_t i) {
                    return std::vector<double>{
                        rc.t_cycles[i],      rc.x0[i].real(),  rc.x0[i].imag(),
                        rc.x1[i],            rc.x[i].real(),   rc.x[i].imag(),
                        rc.beta[i].real(),   rc.beta[i].imag(), rc.validity[i]};
                });
        }
    }

    if (res.wants(OutputKind::populations) && !res.pop_t.empty())
        write_populations_csv(res, dir / "populations.csv", comment);

    if (res.wants(OutputKind::dipole) && res.dipole) {
        const auto& d = *res.dipole;
        detail::write_csv_file(dir / "dipole.csv", comment, {"t_cycles", "d"},
                               d.d.size(), [&d](std::size_t i) {
                                   return std::vector<double>{d.t_cycles[i], d.d[i]};
                               });
    }

    if (res.wants(OutputKind::spectrum) && res.spectrum) {
        const auto& sp = *res.spectrum;
        detail::write_csv_file(dir / "spectrum.csv", comment,
                               {"omega_over_omega0", "relative_power"},
                               sp.omega.size(), [&sp](std::size_t i) {
                                   return std::vector<double>{sp.omega[i], sp.power[i]};
                               });
    }

    if (res.wants(OutputKind::peaks) && res.peaks) {
        const auto& pk = *res.peaks;
        detail::write_csv_file(
            dir / "peaks.csv", comment,
            {"omega_over_omega0", "relative_power", "rank"}, pk.size(),
            [&pk](std::size_t i) {
                return std::vector<double>{pk[i].omega, pk[i].power,
                                           static_cast<double>(i + 1)};
            });
    }
}

struct ErrorMetric {
    double rms = 0.0;
    double sup = 0.0;
};

namespace detail {

inline ErrorMetric metric(const std::vector<double>& a, const std::vector<double>& b) {
    ErrorMetric m;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(a[i] - b[i]);
        acc += d * d;
        if (d > m.sup) m.sup = d;
    }
    m.rms = a.empty() ? 0.0 : std::sqrt(acc / a.size());
    return m;
}

} // namespace detail

// Two solvers on the identical scenario grid, with elementwise error
// metrics on the observables both sides expose.
struct ComparisonReport {
    std::string scenario_name;
    json solver_a;
    json solver_b;
    std::size_t n_samples = 0;
    double t_end_cycles = 0.0;
    ErrorMetric p1, p3;
    std::optional<ErrorMetric> re_b1, im_b1;
    std::optional<ErrorMetric> peak_heights; // at reference-run peak positions
    int matched_peaks = 0;
    ResonanceInfo resonance;
    std::optional<double> riccati_max_validity;
    std::vector<std::string> warnings;

    json to_json() const {
        json j;
        j["scenario"] = scenario_name;
        j["solver_a"] = solver_a;
        j["solver_b"] = solver_b;
        j["grid"] = {{"n_samples", n_samples}, {"t_end_cycles", t_end_cycles}};
        json metrics;
        metrics["p1"] = {{"rms", p1.rms}, {"sup", p1.sup}};
        metrics["p3"] = {{"rms", p3.rms}, {"sup", p3.sup}};
        metrics["re_b1"] =
            re_b1 ? json{{"rms", re_b1->rms}, {"sup", re_b1->sup}} : json(nullptr);
        metrics["im_b1"] =
            im_b1 ? json{{"rms", im_b1->rms}, {"sup", im_b1->sup}} : json(nullptr);
        metrics["peak_heights"] =
            peak_heights
                ? json{{"rms", peak_heights->rms},
                       {"sup", peak_heights->sup},
                       {"matched", matched_peaks}}
                : json(nullptr);
        j["metrics"] = metrics;
        j["resonance"] = {{"order_p", resonance.order_p},
                          {"dynamic_detuning", resonance.dynamic_detuning},
                          {"bare_detuning", resonance.bare_detuning},
                          {"ambiguous", resonance.ambiguous}};
        j["riccati_max_validity"] =
            riccati_max_validity ? json(*riccati_max_validity) : json(nullptr);
        j["warnings"] = warnings;
        return j;
    }
};

inline ComparisonReport compare_runs(const RunResult& ra, const RunResult& rb) {
    if (ra.pop_t.size() != rb.pop_t.size())
        throw std::logic_error("compare_solvers: output grids differ in length");

    ComparisonReport rep;
    rep.scenario_name = ra.resolved.name;
    rep.solver_a = to_json(ra.resolved)["solver"];
    rep.solver_b = to_json(rb.resolved)["solver"];
    rep.n_samples = ra.pop_t.size();
    rep.t_end_cycles = ra.resolved.t_end_cycles;
    rep.p1 = detail::metric(ra.pop1, rb.pop1);
    rep.p3 = detail::metric(ra.pop3, rb.pop3);
    rep.resonance = ra.resonance;

    if (ra.amplitudes && rb.amplitudes) {
        std::vector<double> re_a, re_b, im_a, im_b;
        re_a.reserve(ra.amplitudes->size());
        for (const auto& s : ra.amplitudes->samples) {
            re_a.push_back(s.b1.real());
            im_a.push_back(s.b1.imag());
        }
        for (const auto& s : rb.amplitudes->samples) {
            re_b.push_back(s.b1.real());
            im_b.push_back(s.b1.imag());
        }
        rep.re_b1 = detail::metric(re_a, re_b);
        rep.im_b1 = detail::metric(im_a, im_b);
    }

    if (ra.spectrum && rb.spectrum && ra.peaks) {
        ErrorMetric m;
        double acc = 0.0;
        int n = 0;
        for (const SpectrumPeak& pk : *ra.peaks) {
            const auto j = static_cast<std::size_t>(
                std::llround(pk.omega * ra.resolved.spectrum.points_per_omega0));
            if (j >= rb.spectrum->power.size()) continue;
            const double d = std::fabs(pk.power - rb.spectrum->power[j]);
            acc += d * d;
            if (d > m.sup) m.sup = d;
            ++n;
        }
        if (n > 0) {
            m.rms = std::sqrt(acc / n);
            rep.peak_heights = m;
            rep.matched_peaks = n;
        }
    }

    if (ra.riccati) rep.riccati_max_validity = ra.riccati->max_validity;
    if (rb.riccati) {
        const double v = rb.riccati->max_validity;
        if (!rep.riccati_max_validity || v > *rep.riccati_max_validity)
            rep.riccati_max_validity = v;
    }

    rep.warnings = ra.warnings;
    rep.warnings.insert(rep.warnings.end(), rb.warnings.begin(), rb.warnings.end());
    return rep;
}

inline ComparisonReport compare_solvers(const Scenario& base,
                                        const Scenario::Solver& solver_a,
                                        const Scenario::Solver& solver_b) {
    Scenario sa = base;
    sa.solver = solver_a;
    Scenario sb = base;
    sb.solver = solver_b;
    return compare_runs(run_scenario(sa), run_scenario(sb));
}

// One sweep row: the axis value, run status, and summary metrics. Metric
// fields are NaN whenever they do not apply (failed run, no comparison).
struct SweepRow {
    double value = 0.0;
    std::string status = "ok";
    std::string message;
    double max_p2 = std::numeric_limits<double>::quiet_NaN();
    double rabi_period_est_cycles = std::numeric_limits<double>::quiet_NaN();
    double rms_p1 = std::numeric_limits<double>::quiet_NaN();
    double sup_p1 = std::numeric_limits<double>::quiet_NaN();
    double rms_p3 = std::numeric_limits<double>::quiet_NaN();
    double sup_p3 = std::numeric_limits<double>::quiet_NaN();
};

// Returns base with one numeric field replaced. Axis paths follow the JSON
// schema ("params.omega21", "t_end_cycles", ...); the virtual axis
// "field_scale" multiplies both Rabi frequencies by the value.
inline Scenario apply_axis(const Scenario& base, const std::string& axis,
                           double value) {
    json j = to_json(base);
    if (axis == "field_scale") {
        j["params"]["rabi_omega"] = base.params.rabi_omega * value;
        j["params"]["rabi_m"] = base.params.rabi_m * value;
        return scenario_from_json(j);
    }
    json* cur = &j;
    std::string rest = axis;
    while (true) {
        const auto dot = rest.find('.');
        const std::string key = rest.substr(0, dot);
        if (!cur->is_object() || !cur->contains(key))
            throw ScenarioError("sweep axis '" + axis +
                                "' does not name a scenario field");
        cur = &cur->at(key);
        if (dot == std::string::npos) break;
        rest = rest.substr(dot + 1);
    }
    if (!cur->is_number())
        throw ScenarioError("sweep axis '" + axis + "' is not numeric");
    *cur = value;
    return scenario_from_json(j);
}

namespace detail {

inline std::string axis_dir_name(double value) {
    std::string s = "val_" + format_g12(value);
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
        if (c == '+') c = ' ';
    }
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    return s;
}

} // namespace detail

// Runs the scenario once per axis value, writing each run's outputs under
// out_dir/val_<value>/ plus a sweep_summary.csv. A failing value records an
// error row and the sweep continues. When compare_with is given, each run
// is additionally compared against that solver on the same grid and the
// population error metrics land in the summary.
inline std::vector<SweepRow> run_sweep(
    const Scenario& base, const std::string& axis, const std::vector<double>& values,
    const std::optional<Scenario::Solver>& compare_with,
    const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    std::vector<SweepRow> rows;
    for (double v : sorted) {
        SweepRow row;
        row.value = v;
        try {
            const Scenario sc = apply_axis(base, axis, v);
            const RunResult res = run_scenario(sc);
            write_outputs(res, out_dir / detail::axis_dir_name(v));
            if (!res.pop2.empty())
                row.max_p2 = *std::max_element(res.pop2.begin(), res.pop2.end());
            if (!res.pop3.empty()) {
                const auto it = std::max_element(res.pop3.begin(), res.pop3.end());
                if (*it > 1e-6)
                    row.rabi_period_est_cycles =
                        2.0 * res.pop_t[static_cast<std::size_t>(
                                  it - res.pop3.begin())];
            }
            if (compare_with) {
                Scenario ref = sc;
                ref.solver = *compare_with;
                const ComparisonReport rep = compare_runs(res, run_scenario(ref));
                row.rms_p1 = rep.p1.rms;
                row.sup_p1 = rep.p1.sup;
                row.rms_p3 = rep.p3.rms;
                row.sup_p3 = rep.p3.sup;
            }
        } catch (const std::exception& e) {
            row.status = "error";
            row.message = e.what();
        }
        rows.push_back(row);
    }

    {
        std::ofstream os(out_dir / "sweep_summary.csv", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write sweep_summary.csv");
        os << "# axis=" << axis << " scenario=" << base.name << "\n";
        os << "axis_value,status,max_p2,rabi_period_est_cycles,rms_p1,sup_p1,rms_p3,"
              "sup_p3\n";
        for (const SweepRow& r : rows) {
            os << format_g12(r.value) << "," << r.status << "," << format_g12(r.max_p2)
               << "," << format_g12(r.rabi_period_est_cycles) << ","
               << format_g12(r.rms_p1) << "," << format_g12(r.sup_p1) << ","
               << format_g12(r.rms_p3) << "," << format_g12(r.sup_p3) << "\n";
        }
    }
    return rows;
}

} // namespace lambdasim
