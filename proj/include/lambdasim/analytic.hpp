#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lambdasim/effective.hpp"
#include "lambdasim/errors.hpp"
#include "lambdasim/model.hpp"
#include "lambdasim/tdse.hpp"
#include "lambdasim/timeseries.hpp"

namespace lambdasim {

// Phase convention for reconstructed amplitudes: the cycle-averaged form
// drops the bounded 2 omega0 ripple from theta and phi (the form used for
// slow-population plots), the oscillatory form keeps it.
enum class PhaseVariant { cycle_averaged, oscillatory };

// Which form of the resonant Rabi frequency enters closed-form amplitudes.
enum class RabiForm { general_bessel, small_z };

namespace detail {

struct PhasePair {
    double theta = 0.0;
    double phi = 0.0;
};

inline PhasePair slow_phases(const SystemParams& p, double t_cycles, double ff,
                             double ffc, PhaseVariant variant) {
    const double tau = two_pi * t_cycles;
    double quad = ff;
    if (variant == PhaseVariant::oscillatory) {
        const double sgn = (p.carrier == Carrier::cosine) ? 1.0 : -1.0;
        quad += sgn * ffc;
    }
    PhasePair out;
    out.theta = p.rabi_omega * p.rabi_omega / (2.0 * p.omega21) * quad;
    out.phi = p.omega31 * tau - p.rabi_m * p.rabi_m / (2.0 * p.omega21) * quad;
    return out;
}

inline double slow_rabi(const SystemParams& p, const PulseEnvelope& env,
                        double t_cycles, int order_p, RabiForm form) {
    return form == RabiForm::general_bessel
               ? slow_rabi_general(p, env, t_cycles, order_p)
               : slow_rabi_smallz(p, env, t_cycles, order_p);
}

} // namespace detail

// Approximate closed-form solution of the Riccati equation for x = v/u:
// x0 = i tan(int S) solves the S x^2 part, x1 = 2 int Im S the remainder,
// and their sum approximates the full x while the validity measure
// |(x1^2 + 2 x0 x1) S / omega0| stays small.
struct RiccatiSolution {
    std::vector<double> t_cycles;
    std::vector<cplx> int_s;   // int_0^t S dtau
    std::vector<cplx> x0;
    std::vector<double> x1;
    std::vector<cplx> x;       // x0 + x1
    std::vector<cplx> beta;    // exp[i int S x1 dtau]
    std::vector<double> validity;
    std::vector<double> ff;
    std::vector<double> ffc;
    int steps_per_cycle = 0;
    int samples_per_cycle = 0;
    double max_validity = 0.0;
    // first sample time where validity exceeded 0.1, if any
    std::optional<double> first_flagged_t_cycles;
    // times where Re(int S) crosses pi/2 + k pi near the real axis; there
    // tan blows up, physically a complete 1 -> 3 transfer
    std::vector<double> singularity_times_cycles;

    std::size_t size() const { return t_cycles.size(); }
};

// Builds the approximate Riccati solution by cumulative quadrature of S,
// Im S, and S * x1 on the integration grid. Tan singularities are recorded
// with their crossing times, never raised as errors.
inline RiccatiSolution riccati_solve(const SystemParams& p, const PulseEnvelope& env,
                                     double t_end_cycles, CouplingMode mode,
                                     int steps_per_cycle = 400,
                                     int samples_per_cycle = 20) {
    p.validate();
    const auto g =
        detail::StepGrid::make(t_end_cycles, steps_per_cycle, samples_per_cycle);
    const CouplingFunction coupling(p, env, mode);

    // y = (int S, x1, int S x1, ff, ffc); x1 and the quadratures are real.
    const auto rhs = [&](double t, const std::array<cplx, 5>& y) {
        const cplx s = coupling.value(t, y[3].real(), y[4].real());
        const double f = env.value(t);
        return std::array<cplx, 5>{
            two_pi * s,
            cplx(two_pi * 2.0 * s.imag(), 0.0),
            two_pi * s * y[1].real(),
            cplx(two_pi * f * f, 0.0),
            cplx(two_pi * f * f * std::cos(2.0 * two_pi * t), 0.0),
        };
    };

    RiccatiSolution sol;
    sol.steps_per_cycle = steps_per_cycle;
    sol.samples_per_cycle = samples_per_cycle;

    std::array<cplx, 5> y = {cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0),
                             cplx(0.0, 0.0), cplx(0.0, 0.0)};

    const double half_pi = 0.25 * two_pi;
    const auto branch_index = [half_pi](double re) {
        return std::floor((re - half_pi) / (2.0 * half_pi));
    };

    const auto record = [&](long k, const std::array<cplx, 5>& yy) {
        const double t = k * g.h_cycles;
        const cplx is = yy[0];
        const double x1 = yy[1].real();
        const cplx s_now = coupling.value(t, yy[3].real(), yy[4].real());
        const cplx x0 = cplx(0.0, 1.0) * std::tan(is);
        const double val = std::abs((x1 * x1 + 2.0 * x0 * x1) * s_now);
        sol.t_cycles.push_back(t);
        sol.int_s.push_back(is);
        sol.x0.push_back(x0);
        sol.x1.push_back(x1);
        sol.x.push_back(x0 + x1);
        sol.beta.push_back(std::exp(cplx(0.0, 1.0) * yy[2]));
        sol.validity.push_back(val);
        sol.ff.push_back(yy[3].real());
        sol.ffc.push_back(yy[4].real());
        if (val > sol.max_validity) sol.max_validity = val;
        if (val > 0.1 && !sol.first_flagged_t_cycles) sol.first_flagged_t_cycles = t;
    };

    record(0, y);
    double prev_re = 0.0;
    for (long k = 0; k < g.n_steps; ++k) {
        const auto y_next = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        const double re = y_next[0].real();
        if (branch_index(re) != branch_index(prev_re) &&
            std::fabs(y_next[0].imag()) < 0.5) {
            // linear interpolation of the pi/2 + k pi crossing inside the step
            const double lo = prev_re;
            const double hi = re;
            const double target =
                half_pi + 2.0 * half_pi * std::max(branch_index(lo), branch_index(hi));
            const double frac = (hi != lo) ? (target - lo) / (hi - lo) : 0.0;
            sol.singularity_times_cycles.push_back((k + frac) * g.h_cycles);
        }
        prev_re = re;
        y = y_next;
        if ((k + 1) % g.stride == 0) record(k + 1, y);
    }
    return sol;
}

// Brute-force reference for the same variable: integrates the full Riccati
// equation i dx/dt = S x^2 - S* from x(0) = 0 on the identical grid. Used
// to measure how good the closed-form x0 + x1 actually is.
inline std::vector<cplx> riccati_direct(const SystemParams& p, const PulseEnvelope& env,
                                        double t_end_cycles, CouplingMode mode,
                                        int steps_per_cycle = 400,
                                        int samples_per_cycle = 20) {
    p.validate();
    const auto g =
        detail::StepGrid::make(t_end_cycles, steps_per_cycle, samples_per_cycle);
    const CouplingFunction coupling(p, env, mode);

    const auto rhs = [&](double t, const std::array<cplx, 3>& y) {
        const cplx s = coupling.value(t, y[1].real(), y[2].real());
        const double f = env.value(t);
        return std::array<cplx, 3>{
            cplx(0.0, -two_pi) * (s * y[0] * y[0] - std::conj(s)),
            cplx(two_pi * f * f, 0.0),
            cplx(two_pi * f * f * std::cos(2.0 * two_pi * t), 0.0),
        };
    };

    std::vector<cplx> xs;
    std::array<cplx, 3> y = {cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)};
    xs.push_back(y[0]);
    for (long k = 0; k < g.n_steps; ++k) {
        y = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        if ((k + 1) % g.stride == 0) xs.push_back(y[0]);
    }
    return xs;
}

// Bare amplitudes from the approximate Riccati solution:
// b1 = cos(int S) e^{i theta} beta and
// b3 = [i sin(int S) + x1 cos(int S)] e^{-i phi} beta,
// with b2 filled adiabatically.
inline TimeSeries<AmplitudeState> amplitudes_from_riccati(
    const RiccatiSolution& sol, const SystemParams& p, const PulseEnvelope& env,
    PhaseVariant variant = PhaseVariant::cycle_averaged) {
    TimeSeries<AmplitudeState> out;
    out.t_cycles = sol.t_cycles;
    out.steps_per_cycle = sol.steps_per_cycle;
    out.samples_per_cycle = sol.samples_per_cycle;
    out.samples.reserve(sol.size());
    for (std::size_t i = 0; i < sol.size(); ++i) {
        const auto ph =
            detail::slow_phases(p, sol.t_cycles[i], sol.ff[i], sol.ffc[i], variant);
        const cplx c = std::cos(sol.int_s[i]);
        const cplx s = std::sin(sol.int_s[i]);
        AmplitudeState a;
        a.b1 = c * std::exp(cplx(0.0, ph.theta)) * sol.beta[i];
        a.b3 = (cplx(0.0, 1.0) * s + sol.x1[i] * c) * std::exp(cplx(0.0, -ph.phi)) *
               sol.beta[i];
        a.b2 = adiabatic_b2(p, env, a.b1, a.b3, sol.t_cycles[i]);
        out.samples.push_back(a);
    }
    return out;
}

// The four slow-change ratios behind the closed-form amplitudes, evaluated
// at the envelope peak. Each should be well below 1; ratios above 0.1
// produce warnings (threshold is this implementation's choice, the source
// analysis only requires "much smaller").
struct ApplicabilityReport {
    double omega31_ratio = 0.0;     // |omega31 / omega21|
    double rabi_omega_sq_ratio = 0.0; // (Omega_R / omega21)^2
    double rabi_m_sq_ratio = 0.0;     // (M_R / omega21)^2
    double slow_rabi_ratio = 0.0;     // |Omega^(P) / omega21| at peak envelope

    std::vector<std::string> warnings() const {
        std::vector<std::string> w;
        const auto check = [&w](double value, const std::string& name) {
            if (value > 0.1)
                w.push_back("applicability: " + name + " = " + format_g12(value) +
                            " exceeds 0.1; closed-form amplitudes are marginal");
        };
        check(omega31_ratio, "|omega31/omega21|");
        check(rabi_omega_sq_ratio, "(rabi_omega/omega21)^2");
        check(rabi_m_sq_ratio, "(rabi_m/omega21)^2");
        check(slow_rabi_ratio, "|slow_rabi/omega21|");
        return w;
    }
};

inline double envelope_peak_time(const PulseEnvelope& env) {
    return env.shape_cycles;
}

inline ApplicabilityReport applicability_check(const SystemParams& p,
                                               const PulseEnvelope& env, int order_p) {
    ApplicabilityReport rep;
    rep.omega31_ratio = std::fabs(p.omega31 / p.omega21);
    rep.rabi_omega_sq_ratio = std::pow(p.rabi_omega / p.omega21, 2);
    rep.rabi_m_sq_ratio = std::pow(p.rabi_m / p.omega21, 2);
    rep.slow_rabi_ratio =
        std::fabs(slow_rabi_general(p, env, envelope_peak_time(env), order_p) /
                  p.omega21);
    return rep;
}

// Closed-form amplitudes of the generalized rotating-wave solution:
// b1 = cos(A) e^{i theta}, b3 = i sin(A) e^{-i phi} with A = int Omega^(P).
inline std::pair<cplx, cplx> grwa_amplitudes(
    const SystemParams& p, const PulseEnvelope& env, double t_cycles, int order_p,
    RabiForm rabi_form, PhaseVariant variant = PhaseVariant::cycle_averaged,
    int steps_per_cycle = 400) {
    if (order_p % 2 != 0)
        throw std::invalid_argument("grwa_amplitudes: order P must be even");
    const double area = detail::cumulative_quadrature(
        [&](double t) { return detail::slow_rabi(p, env, t, order_p, rabi_form); },
        t_cycles, steps_per_cycle);
    const PhaseSet ps = phases(p, env, t_cycles, steps_per_cycle);
    const auto ph = detail::slow_phases(p, t_cycles, ps.ff, ps.ffc, variant);
    return {std::cos(area) * std::exp(cplx(0.0, ph.theta)),
            cplx(0.0, 1.0) * std::sin(area) * std::exp(cplx(0.0, -ph.phi))};
}

// Same closed form evaluated along a whole trajectory, with b2 filled
// adiabatically so the series can feed the spectrum directly.
inline TimeSeries<AmplitudeState> grwa_series(
    const SystemParams& p, const PulseEnvelope& env, double t_end_cycles, int order_p,
    RabiForm rabi_form, PhaseVariant variant = PhaseVariant::cycle_averaged,
    int steps_per_cycle = 400, int samples_per_cycle = 20) {
    p.validate();
    if (order_p % 2 != 0)
        throw std::invalid_argument("grwa_series: order P must be even");
    const auto g =
        detail::StepGrid::make(t_end_cycles, steps_per_cycle, samples_per_cycle);

    const auto rhs = [&](double t, const std::array<cplx, 3>&) {
        const double f = env.value(t);
        return std::array<cplx, 3>{
            cplx(two_pi * detail::slow_rabi(p, env, t, order_p, rabi_form), 0.0),
            cplx(two_pi * f * f, 0.0),
            cplx(two_pi * f * f * std::cos(2.0 * two_pi * t), 0.0),
        };
    };

    TimeSeries<AmplitudeState> out;
    out.steps_per_cycle = steps_per_cycle;
    out.samples_per_cycle = samples_per_cycle;

    const auto record = [&](long k, const std::array<cplx, 3>& y) {
        const double t = k * g.h_cycles;
        const auto ph = detail::slow_phases(p, t, y[1].real(), y[2].real(), variant);
        const double area = y[0].real();
        AmplitudeState a;
        a.b1 = std::cos(area) * std::exp(cplx(0.0, ph.theta));
        a.b3 = cplx(0.0, 1.0) * std::sin(area) * std::exp(cplx(0.0, -ph.phi));
        a.b2 = adiabatic_b2(p, env, a.b1, a.b3, t);
        out.t_cycles.push_back(t);
        out.samples.push_back(a);
    };

    std::array<cplx, 3> y = {cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)};
    record(0, y);
    for (long k = 0; k < g.n_steps; ++k) {
        y = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        if ((k + 1) % g.stride == 0) record(k + 1, y);
    }
    return out;
}

// Closed-form amplitudes of the truncated Floquet reduction. Identical
// moduli to the small-z rotating-wave solution; the explicit phase factors
// are exp[i (Omega_R^2/2 omega21) int f^2] on b1 and
// exp[i (Delta t - P omega0 t + (M_R^2/2 omega21) int f^2)] on b3.
inline std::pair<cplx, cplx> floquet_amplitudes(const SystemParams& p,
                                                const PulseEnvelope& env,
                                                double t_cycles, int order_p,
                                                int steps_per_cycle = 400) {
    if (order_p < 0 || order_p % 2 != 0)
        throw std::invalid_argument("floquet_amplitudes: order P must be even and >= 0");
    const double area = detail::cumulative_quadrature(
        [&](double t) { return slow_rabi_smallz(p, env, t, order_p); }, t_cycles,
        steps_per_cycle);
    const double ff = detail::cumulative_quadrature(
        [&](double t) {
            const double f = env.value(t);
            return f * f;
        },
        t_cycles, steps_per_cycle);
    const double tau = two_pi * t_cycles;
    const double phase1 = p.rabi_omega * p.rabi_omega / (2.0 * p.omega21) * ff;
    const double phase3 = (static_stark_shift(p) - order_p) * tau +
                          p.rabi_m * p.rabi_m / (2.0 * p.omega21) * ff;
    return {std::cos(area) * std::exp(cplx(0.0, phase1)),
            cplx(0.0, 1.0) * std::sin(area) * std::exp(cplx(0.0, phase3))};
}

inline TimeSeries<AmplitudeState> floquet_series(const SystemParams& p,
                                                 const PulseEnvelope& env,
                                                 double t_end_cycles, int order_p,
                                                 int steps_per_cycle = 400,
                                                 int samples_per_cycle = 20) {
    p.validate();
    if (order_p < 0 || order_p % 2 != 0)
        throw std::invalid_argument("floquet_series: order P must be even and >= 0");
    const auto g =
        detail::StepGrid::make(t_end_cycles, steps_per_cycle, samples_per_cycle);

    const auto rhs = [&](double t, const std::array<cplx, 2>&) {
        const double f = env.value(t);
        return std::array<cplx, 2>{
            cplx(two_pi * slow_rabi_smallz(p, env, t, order_p), 0.0),
            cplx(two_pi * f * f, 0.0),
        };
    };

    TimeSeries<AmplitudeState> out;
    out.steps_per_cycle = steps_per_cycle;
    out.samples_per_cycle = samples_per_cycle;

    const auto record = [&](long k, const std::array<cplx, 2>& y) {
        const double t = k * g.h_cycles;
        const double tau = two_pi * t;
        const double area = y[0].real();
        const double ff = y[1].real();
        AmplitudeState a;
        const double phase1 = p.rabi_omega * p.rabi_omega / (2.0 * p.omega21) * ff;
        const double phase3 = (static_stark_shift(p) - order_p) * tau +
                              p.rabi_m * p.rabi_m / (2.0 * p.omega21) * ff;
        a.b1 = std::cos(area) * std::exp(cplx(0.0, phase1));
        a.b3 = cplx(0.0, 1.0) * std::sin(area) * std::exp(cplx(0.0, phase3));
        a.b2 = adiabatic_b2(p, env, a.b1, a.b3, t);
        out.t_cycles.push_back(t);
        out.samples.push_back(a);
    };

    std::array<cplx, 2> y = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
    record(0, y);
    for (long k = 0; k < g.n_steps; ++k) {
        y = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        if ((k + 1) % g.stride == 0) record(k + 1, y);
    }
    return out;
}

} // namespace lambdasim
