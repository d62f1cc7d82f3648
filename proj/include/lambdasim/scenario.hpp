#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lambdasim/analytic.hpp"
#include "lambdasim/effective.hpp"
#include "lambdasim/errors.hpp"
#include "lambdasim/model.hpp"

namespace lambdasim {

using json = nlohmann::json;

enum class SolverType {
    full_numeric,
    ratio_numeric,
    two_state_numeric,
    riccati_analytic,
    grwa,
    floquet,
};

enum class OutputKind { amplitudes, populations, dipole, spectrum, peaks };

// Declarative description of one run. Mirrors the JSON schema one to one;
// resolve() turns it into a self-contained document (unit normalization,
// resonance detection, window defaults) that re-parses to itself.
struct Scenario {
    std::string name = "unnamed";

    struct Params {
        double omega0 = 1.0;
        double omega21 = 0.0;
        double omega31 = 0.0;
        double rabi_omega = 0.0;
        double rabi_m = 0.0;
        Carrier carrier = Carrier::cosine;
    } params;

    struct Envelope {
        PulseEnvelope::Shape shape = PulseEnvelope::Shape::sine_ramp_flat;
        double shape_cycles = 4.0;
    } envelope;

    double t_end_cycles = 100.0;

    struct Coupling {
        CouplingMode::Kind kind = CouplingMode::Kind::exact;
        bool use_exact_alpha = false;
        int n_max = -1;               // bessel_truncated: -1 = auto
        std::optional<int> order_p;   // slow_only: empty = detect
        bool with_phase_factor = false;
    };

    struct Solver {
        SolverType type = SolverType::full_numeric;
        Coupling coupling;
        std::optional<int> order_p;   // grwa / floquet: empty = detect
        RabiForm rabi_form = RabiForm::general_bessel;
        PhaseVariant phase_variant = PhaseVariant::cycle_averaged;
    } solver;

    struct Numeric {
        int steps_per_cycle = 400;
        int samples_per_cycle = 20;
        bool halving_check = true;
        double ratio_blowup_threshold = 1e3;
    } numeric;

    struct Spectrum {
        double omega_max = 6.0;
        int points_per_omega0 = 200;
        double window_start_cycles = 0.0;
        double window_end_cycles = -1.0; // -1 = up to t_end
        double peak_min_relative_height = 1e-8;
        double peak_min_separation = 0.5;
    } spectrum;

    std::vector<OutputKind> outputs = {
        OutputKind::amplitudes, OutputKind::populations, OutputKind::dipole,
        OutputKind::spectrum, OutputKind::peaks};

    // When set, omega31 is replaced so the dynamic detuning of this even
    // resonance order vanishes: omega31 = P omega0 - Delta. Lets sweeps
    // over omega21 stay on resonance the way the source comparisons do.
    std::optional<int> lock_resonance_p;

    SystemParams system_params() const {
        SystemParams p;
        p.omega0 = 1.0;
        p.omega21 = params.omega21;
        p.omega31 = params.omega31;
        p.rabi_omega = params.rabi_omega;
        p.rabi_m = params.rabi_m;
        p.carrier = params.carrier;
        return p;
    }

    PulseEnvelope pulse_envelope() const {
        return envelope.shape == PulseEnvelope::Shape::sine_ramp_flat
                   ? PulseEnvelope::sine_ramp_flat(envelope.shape_cycles)
                   : PulseEnvelope::smooth_squared_exp(envelope.shape_cycles);
    }
};

namespace detail {

inline std::string solver_type_name(SolverType t) {
    switch (t) {
    case SolverType::full_numeric: return "full_numeric";
    case SolverType::ratio_numeric: return "ratio_numeric";
    case SolverType::two_state_numeric: return "two_state_numeric";
    case SolverType::riccati_analytic: return "riccati_analytic";
    case SolverType::grwa: return "grwa";
    case SolverType::floquet: return "floquet";
    }
    return "?";
}

inline SolverType parse_solver_type(const std::string& s, const std::string& path) {
    for (SolverType t : {SolverType::full_numeric, SolverType::ratio_numeric,
                         SolverType::two_state_numeric, SolverType::riccati_analytic,
                         SolverType::grwa, SolverType::floquet}) {
        if (solver_type_name(t) == s) return t;
    }
    throw ScenarioError(path + ": unknown solver type '" + s + "'");
}

inline std::string coupling_kind_name(CouplingMode::Kind k) {
    switch (k) {
    case CouplingMode::Kind::exact: return "exact";
    case CouplingMode::Kind::bessel_truncated: return "bessel_truncated";
    case CouplingMode::Kind::slow_only: return "slow_only";
    }
    return "?";
}

inline CouplingMode::Kind parse_coupling_kind(const std::string& s,
                                              const std::string& path) {
    if (s == "exact") return CouplingMode::Kind::exact;
    if (s == "bessel_truncated") return CouplingMode::Kind::bessel_truncated;
    if (s == "slow_only") return CouplingMode::Kind::slow_only;
    throw ScenarioError(path + ": unknown coupling mode '" + s + "'");
}

inline std::string output_kind_name(OutputKind k) {
    switch (k) {
    case OutputKind::amplitudes: return "amplitudes";
    case OutputKind::populations: return "populations";
    case OutputKind::dipole: return "dipole";
    case OutputKind::spectrum: return "spectrum";
    case OutputKind::peaks: return "peaks";
    }
    return "?";
}

inline OutputKind parse_output_kind(const std::string& s, const std::string& path) {
    for (OutputKind k : {OutputKind::amplitudes, OutputKind::populations,
                         OutputKind::dipole, OutputKind::spectrum, OutputKind::peaks}) {
        if (output_kind_name(k) == s) return k;
    }
    throw ScenarioError(path + ": unknown output kind '" + s + "'");
}

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    if (!obj.is_object()) throw ScenarioError(path + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw ScenarioError(path + "." + item.key() + ": unknown key");
    }
}

template <class T>
T get_or(const json& obj, const std::string& key, const T& fallback,
         const std::string& path) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ScenarioError(path + "." + key + ": " + e.what());
    }
}

} // namespace detail

inline json to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    j["params"] = {
        {"omega0", sc.params.omega0},
        {"omega21", sc.params.omega21},
        {"omega31", sc.params.omega31},
        {"rabi_omega", sc.params.rabi_omega},
        {"rabi_m", sc.params.rabi_m},
        {"carrier", sc.params.carrier == Carrier::cosine ? "cosine" : "sine"},
    };
    j["envelope"] = {
        {"shape", sc.envelope.shape == PulseEnvelope::Shape::sine_ramp_flat
                      ? "sine_ramp_flat"
                      : "smooth_squared_exp"},
        {sc.envelope.shape == PulseEnvelope::Shape::sine_ramp_flat ? "rise_cycles"
                                                                   : "tau_cycles",
         sc.envelope.shape_cycles},
    };
    j["t_end_cycles"] = sc.t_end_cycles;

    json solver;
    solver["type"] = detail::solver_type_name(sc.solver.type);
    if (sc.solver.type == SolverType::two_state_numeric ||
        sc.solver.type == SolverType::riccati_analytic) {
        json coupling;
        coupling["mode"] = detail::coupling_kind_name(sc.solver.coupling.kind);
        if (sc.solver.coupling.kind == CouplingMode::Kind::exact)
            coupling["use_exact_alpha"] = sc.solver.coupling.use_exact_alpha;
        if (sc.solver.coupling.kind == CouplingMode::Kind::bessel_truncated)
            coupling["n_max"] = sc.solver.coupling.n_max;
        if (sc.solver.coupling.kind == CouplingMode::Kind::slow_only) {
            if (sc.solver.coupling.order_p)
                coupling["order_p"] = *sc.solver.coupling.order_p;
            else
                coupling["order_p"] = "auto";
            coupling["with_phase_factor"] = sc.solver.coupling.with_phase_factor;
        }
        solver["coupling"] = coupling;
    }
    if (sc.solver.type == SolverType::grwa || sc.solver.type == SolverType::floquet) {
        if (sc.solver.order_p)
            solver["order_p"] = *sc.solver.order_p;
        else
            solver["order_p"] = "auto";
    }
    if (sc.solver.type == SolverType::grwa)
        solver["rabi_form"] = sc.solver.rabi_form == RabiForm::general_bessel
                                  ? "general_bessel"
                                  : "small_z";
    if (sc.solver.type == SolverType::grwa ||
        sc.solver.type == SolverType::riccati_analytic)
        solver["phase_variant"] =
            sc.solver.phase_variant == PhaseVariant::cycle_averaged ? "cycle_averaged"
                                                                    : "oscillatory";
    j["solver"] = solver;

    j["numeric"] = {
        {"steps_per_cycle", sc.numeric.steps_per_cycle},
        {"samples_per_cycle", sc.numeric.samples_per_cycle},
        {"halving_check", sc.numeric.halving_check},
        {"ratio_blowup_threshold", sc.numeric.ratio_blowup_threshold},
    };
    j["spectrum"] = {
        {"omega_max", sc.spectrum.omega_max},
        {"points_per_omega0", sc.spectrum.points_per_omega0},
        {"window_start_cycles", sc.spectrum.window_start_cycles},
        {"window_end_cycles", sc.spectrum.window_end_cycles},
        {"peak_min_relative_height", sc.spectrum.peak_min_relative_height},
        {"peak_min_separation", sc.spectrum.peak_min_separation},
    };
    json outs = json::array();
    for (OutputKind k : sc.outputs) outs.push_back(detail::output_kind_name(k));
    j["outputs"] = outs;
    if (sc.lock_resonance_p) j["lock_resonance_p"] = *sc.lock_resonance_p;
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    detail::require_keys(j, {"name", "params", "envelope", "t_end_cycles", "solver",
                             "numeric", "spectrum", "outputs", "lock_resonance_p"},
                         "scenario");
    Scenario sc;
    sc.name = detail::get_or<std::string>(j, "name", "unnamed", "scenario");

    if (!j.contains("params")) throw ScenarioError("scenario.params: required");
    {
        const json& p = j.at("params");
        detail::require_keys(p, {"omega0", "omega21", "omega31", "rabi_omega",
                                 "rabi_m", "carrier"},
                             "scenario.params");
        sc.params.omega0 = detail::get_or<double>(p, "omega0", 1.0, "scenario.params");
        sc.params.omega21 = detail::get_or<double>(p, "omega21", 0.0, "scenario.params");
        sc.params.omega31 = detail::get_or<double>(p, "omega31", 0.0, "scenario.params");
        sc.params.rabi_omega =
            detail::get_or<double>(p, "rabi_omega", 0.0, "scenario.params");
        sc.params.rabi_m = detail::get_or<double>(p, "rabi_m", 0.0, "scenario.params");
        const std::string carrier =
            detail::get_or<std::string>(p, "carrier", "cosine", "scenario.params");
        if (carrier == "cosine")
            sc.params.carrier = Carrier::cosine;
        else if (carrier == "sine")
            sc.params.carrier = Carrier::sine;
        else
            throw ScenarioError("scenario.params.carrier: unknown carrier '" + carrier +
                                "'");
    }

    if (!j.contains("envelope")) throw ScenarioError("scenario.envelope: required");
    {
        const json& e = j.at("envelope");
        detail::require_keys(e, {"shape", "rise_cycles", "tau_cycles"},
                             "scenario.envelope");
        const std::string shape =
            detail::get_or<std::string>(e, "shape", "", "scenario.envelope");
        if (shape == "sine_ramp_flat") {
            sc.envelope.shape = PulseEnvelope::Shape::sine_ramp_flat;
            if (!e.contains("rise_cycles"))
                throw ScenarioError("scenario.envelope.rise_cycles: required");
            sc.envelope.shape_cycles =
                detail::get_or<double>(e, "rise_cycles", 4.0, "scenario.envelope");
        } else if (shape == "smooth_squared_exp") {
            sc.envelope.shape = PulseEnvelope::Shape::smooth_squared_exp;
            if (!e.contains("tau_cycles"))
                throw ScenarioError("scenario.envelope.tau_cycles: required");
            sc.envelope.shape_cycles =
                detail::get_or<double>(e, "tau_cycles", 100.0, "scenario.envelope");
        } else {
            throw ScenarioError("scenario.envelope.shape: unknown shape '" + shape +
                                "'");
        }
    }

    sc.t_end_cycles = detail::get_or<double>(j, "t_end_cycles", 100.0, "scenario");

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        detail::require_keys(
            s, {"type", "coupling", "order_p", "rabi_form", "phase_variant"},
            "scenario.solver");
        sc.solver.type = detail::parse_solver_type(
            detail::get_or<std::string>(s, "type", "full_numeric", "scenario.solver"),
            "scenario.solver.type");
        if (s.contains("coupling")) {
            const json& c = s.at("coupling");
            detail::require_keys(c,
                                 {"mode", "use_exact_alpha", "n_max", "order_p",
                                  "with_phase_factor"},
                                 "scenario.solver.coupling");
            sc.solver.coupling.kind = detail::parse_coupling_kind(
                detail::get_or<std::string>(c, "mode", "exact",
                                            "scenario.solver.coupling"),
                "scenario.solver.coupling.mode");
            sc.solver.coupling.use_exact_alpha = detail::get_or<bool>(
                c, "use_exact_alpha", false, "scenario.solver.coupling");
            sc.solver.coupling.n_max =
                detail::get_or<int>(c, "n_max", -1, "scenario.solver.coupling");
            if (c.contains("order_p") && !c.at("order_p").is_string())
                sc.solver.coupling.order_p =
                    detail::get_or<int>(c, "order_p", 0, "scenario.solver.coupling");
            sc.solver.coupling.with_phase_factor = detail::get_or<bool>(
                c, "with_phase_factor", false, "scenario.solver.coupling");
        }
        if (s.contains("order_p") && !s.at("order_p").is_string())
            sc.solver.order_p = detail::get_or<int>(s, "order_p", 0, "scenario.solver");
        const std::string form = detail::get_or<std::string>(
            s, "rabi_form", "general_bessel", "scenario.solver");
        if (form == "general_bessel")
            sc.solver.rabi_form = RabiForm::general_bessel;
        else if (form == "small_z")
            sc.solver.rabi_form = RabiForm::small_z;
        else
            throw ScenarioError("scenario.solver.rabi_form: unknown form '" + form +
                                "'");
        const std::string variant = detail::get_or<std::string>(
            s, "phase_variant", "cycle_averaged", "scenario.solver");
        if (variant == "cycle_averaged")
            sc.solver.phase_variant = PhaseVariant::cycle_averaged;
        else if (variant == "oscillatory")
            sc.solver.phase_variant = PhaseVariant::oscillatory;
        else
            throw ScenarioError("scenario.solver.phase_variant: unknown variant '" +
                                variant + "'");
    }

    if (j.contains("numeric")) {
        const json& n = j.at("numeric");
        detail::require_keys(n,
                             {"steps_per_cycle", "samples_per_cycle", "halving_check",
                              "ratio_blowup_threshold"},
                             "scenario.numeric");
        sc.numeric.steps_per_cycle =
            detail::get_or<int>(n, "steps_per_cycle", 400, "scenario.numeric");
        sc.numeric.samples_per_cycle =
            detail::get_or<int>(n, "samples_per_cycle", 20, "scenario.numeric");
        sc.numeric.halving_check =
            detail::get_or<bool>(n, "halving_check", true, "scenario.numeric");
        sc.numeric.ratio_blowup_threshold = detail::get_or<double>(
            n, "ratio_blowup_threshold", 1e3, "scenario.numeric");
    }

    if (j.contains("spectrum")) {
        const json& sp = j.at("spectrum");
        detail::require_keys(sp,
                             {"omega_max", "points_per_omega0", "window_start_cycles",
                              "window_end_cycles", "peak_min_relative_height",
                              "peak_min_separation"},
                             "scenario.spectrum");
        sc.spectrum.omega_max =
            detail::get_or<double>(sp, "omega_max", 6.0, "scenario.spectrum");
        sc.spectrum.points_per_omega0 =
            detail::get_or<int>(sp, "points_per_omega0", 200, "scenario.spectrum");
        sc.spectrum.window_start_cycles = detail::get_or<double>(
            sp, "window_start_cycles", 0.0, "scenario.spectrum");
        sc.spectrum.window_end_cycles = detail::get_or<double>(
            sp, "window_end_cycles", -1.0, "scenario.spectrum");
        sc.spectrum.peak_min_relative_height = detail::get_or<double>(
            sp, "peak_min_relative_height", 1e-8, "scenario.spectrum");
        sc.spectrum.peak_min_separation = detail::get_or<double>(
            sp, "peak_min_separation", 0.5, "scenario.spectrum");
    }

    if (j.contains("outputs")) {
        if (!j.at("outputs").is_array())
            throw ScenarioError("scenario.outputs: expected an array");
        sc.outputs.clear();
        for (const auto& o : j.at("outputs"))
            sc.outputs.push_back(detail::parse_output_kind(
                o.is_string() ? o.get<std::string>() : std::string("?"),
                "scenario.outputs"));
    }

    if (j.contains("lock_resonance_p") && !j.at("lock_resonance_p").is_null())
        sc.lock_resonance_p =
            detail::get_or<int>(j, "lock_resonance_p", 0, "scenario");

    return sc;
}

// Normalizes and completes a scenario so that the echoed document is fully
// explicit: frequencies rescaled to omega0 = 1, resonance lock applied,
// auto resonance orders replaced by detected values, spectrum window
// closed. Validation failures carry the JSON field path.
inline Scenario resolve(const Scenario& input) {
    Scenario sc = input;

    if (!(sc.params.omega0 > 0.0))
        throw ScenarioError("scenario.params.omega0: must be positive");
    sc.params.omega21 /= sc.params.omega0;
    sc.params.omega31 /= sc.params.omega0;
    sc.params.rabi_omega /= sc.params.omega0;
    sc.params.rabi_m /= sc.params.omega0;
    sc.params.omega0 = 1.0;

    if (sc.lock_resonance_p) {
        if (*sc.lock_resonance_p % 2 != 0)
            throw ScenarioError("scenario.lock_resonance_p: must be even");
        SystemParams trial = sc.system_params();
        trial.omega31 = 0.0;
        sc.params.omega31 = *sc.lock_resonance_p - static_stark_shift(trial);
    }

    try {
        sc.system_params().validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("scenario.params: ") + e.what());
    }
    if (!(sc.envelope.shape_cycles > 0.0))
        throw ScenarioError("scenario.envelope: shape time must be positive");
    if (!(sc.t_end_cycles > 0.0))
        throw ScenarioError("scenario.t_end_cycles: must be positive");
    if (sc.numeric.steps_per_cycle < 100)
        throw ScenarioError("scenario.numeric.steps_per_cycle: must be >= 100");
    if (sc.numeric.samples_per_cycle < 1 ||
        sc.numeric.steps_per_cycle % sc.numeric.samples_per_cycle != 0)
        throw ScenarioError(
            "scenario.numeric.samples_per_cycle: must divide steps_per_cycle");

    const ResonanceInfo res = detect_resonance(sc.system_params());
    const auto fill_order = [&](std::optional<int>& slot, const char* path) {
        if (!slot) {
            slot = res.order_p;
            return;
        }
        if (*slot % 2 != 0)
            throw ScenarioError(std::string(path) + ": resonance order must be even");
    };
    if (sc.solver.type == SolverType::two_state_numeric ||
        sc.solver.type == SolverType::riccati_analytic) {
        if (sc.solver.coupling.kind == CouplingMode::Kind::slow_only)
            fill_order(sc.solver.coupling.order_p, "scenario.solver.coupling.order_p");
    }
    if (sc.solver.type == SolverType::grwa || sc.solver.type == SolverType::floquet) {
        fill_order(sc.solver.order_p, "scenario.solver.order_p");
        if (sc.solver.type == SolverType::floquet && *sc.solver.order_p < 0)
            throw ScenarioError(
                "scenario.solver.order_p: floquet solver requires P >= 0");
    }

    if (sc.spectrum.window_end_cycles < 0.0)
        sc.spectrum.window_end_cycles = sc.t_end_cycles;
    if (sc.spectrum.window_end_cycles > sc.t_end_cycles)
        throw ScenarioError("scenario.spectrum.window_end_cycles: beyond t_end_cycles");
    if (sc.spectrum.window_start_cycles < 0.0 ||
        sc.spectrum.window_start_cycles >= sc.spectrum.window_end_cycles)
        throw ScenarioError("scenario.spectrum.window_start_cycles: bad window");

    const bool wants_spectrum =
        std::any_of(sc.outputs.begin(), sc.outputs.end(), [](OutputKind k) {
            return k == OutputKind::spectrum || k == OutputKind::peaks;
        });
    if (wants_spectrum &&
        sc.numeric.samples_per_cycle < 4.0 * sc.spectrum.omega_max)
        throw ScenarioError(
            "scenario.spectrum.omega_max: needs samples_per_cycle >= " +
            std::to_string(static_cast<int>(std::ceil(4.0 * sc.spectrum.omega_max))));

    CouplingMode probe;
    probe.kind = sc.solver.coupling.kind;
    probe.use_exact_alpha = sc.solver.coupling.use_exact_alpha;
    probe.n_max = sc.solver.coupling.n_max;
    probe.order_p = sc.solver.coupling.order_p.value_or(res.order_p);
    probe.with_phase_factor = sc.solver.coupling.with_phase_factor;
    if (sc.solver.type == SolverType::two_state_numeric ||
        sc.solver.type == SolverType::riccati_analytic) {
        try {
            CouplingFunction check(sc.system_params(), sc.pulse_envelope(), probe);
            if (probe.kind == CouplingMode::Kind::bessel_truncated)
                sc.solver.coupling.n_max = check.mode().n_max;
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(std::string("scenario.solver.coupling: ") + e.what());
        }
    }

    return sc;
}

// Embedded named scenarios reproducing the source comparisons: a ramped
// flat pulse on the 13:1.99445 system and a smooth 100-cycle pulse on the
// 19:2 system, plus the latter's omega21 = 50 variant.
inline Scenario builtin_scenario(const std::string& name) {
    Scenario sc;
    sc.numeric.steps_per_cycle = 1600; // keeps norm drift near 1e-9 over the
    sc.numeric.samples_per_cycle = 20; // full few-hundred-cycle runs
    if (name == "fig2") {
        sc.name = "fig2";
        sc.params = {1.0, 13.0, 1.99445, 0.5, 0.3, Carrier::cosine};
        sc.envelope = {PulseEnvelope::Shape::sine_ramp_flat, 4.0};
        sc.t_end_cycles = 400.0;
        return sc;
    }
    if (name == "fig3" || name == "fig3c") {
        sc.name = name;
        sc.params = {1.0, name == "fig3" ? 19.0 : 50.0, 2.0, 0.8, 0.7,
                     Carrier::cosine};
        sc.envelope = {PulseEnvelope::Shape::smooth_squared_exp, 100.0};
        sc.t_end_cycles = 300.0;
        return sc;
    }
    throw ScenarioError("unknown built-in scenario '" + name +
                        "' (available: fig2, fig3, fig3c)");
}

inline std::vector<std::string> builtin_scenario_names() {
    return {"fig2", "fig3", "fig3c"};
}

} // namespace lambdasim
