#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lambdasim/errors.hpp"
#include "lambdasim/model.hpp"
#include "lambdasim/specfn.hpp"
#include "lambdasim/tdse.hpp"
#include "lambdasim/timeseries.hpp"

namespace lambdasim {

// Leading-order adiabatic reconstruction of the intermediate amplitude:
// b2 = (Omega(t) b1 + M(t) b3) / omega21.
inline cplx adiabatic_b2(const SystemParams& p, const PulseEnvelope& env, cplx b1,
                         cplx b3, double t_cycles) {
    const RabiPair w = instantaneous_rabi(p, env, t_cycles);
    return (w.omega * b1 + w.m * b3) / p.omega21;
}

// Selects how the complex two-state coupling S(t) is evaluated:
//   exact            (Omega M / omega21) e^{-i alpha}, the full form;
//   bessel_truncated the Fourier-Bessel expansion truncated at |n| <= n_max,
//                    identical to exact up to the truncation tail;
//   slow_only        only the resonant harmonic Omega^(P), optionally with
//                    the residual phase factor e^{-i Delta_t}.
struct CouplingMode {
    enum class Kind { exact, bessel_truncated, slow_only };

    Kind kind = Kind::exact;
    bool use_exact_alpha = false; // exact kind: quadrature alpha instead of
                                  // the slow-pulse approximation
    int n_max = -1;               // bessel kind: -1 picks |P|/2 + 6
    int order_p = 0;              // slow kind: resonance order
    bool with_phase_factor = false;

    static CouplingMode exact(bool use_exact_alpha = false) {
        CouplingMode m;
        m.kind = Kind::exact;
        m.use_exact_alpha = use_exact_alpha;
        return m;
    }

    static CouplingMode bessel_truncated(int n_max = -1) {
        CouplingMode m;
        m.kind = Kind::bessel_truncated;
        m.n_max = n_max;
        return m;
    }

    static CouplingMode slow_only(int order_p, bool with_phase_factor = false) {
        CouplingMode m;
        m.kind = Kind::slow_only;
        m.order_p = order_p;
        m.with_phase_factor = with_phase_factor;
        return m;
    }
};

// Resonant harmonic of the coupling, full Bessel form. Written as
// w f^2 [J_m(z) - m J_m(z)/z] with m = P/2 and z = Delta f^2 / (2 omega0),
// which keeps the f = 0 and Delta = 0 limits finite without any division;
// the P = 2 limit at Delta = 0 is w f^2 / 2, orders P >= 4 vanish there.
// Cosine carrier contributes (-1)^m, sine contributes +1.
inline double slow_rabi_general(const SystemParams& p, const PulseEnvelope& env,
                                double t_cycles, int order_p) {
    if (order_p % 2 != 0)
        throw std::invalid_argument("slow_rabi_general: order P must be even");
    const int m = order_p / 2;
    const double f = env.value(t_cycles);
    const double f2 = f * f;
    const double w = p.rabi_omega * p.rabi_m / (2.0 * p.omega21);
    const double z = 0.5 * static_stark_shift(p) * f2;
    double bracket = bessel_j(m, z).value;
    if (m != 0) bracket -= m * bessel_j_over_z(m, z);
    double sign = 1.0;
    if (p.carrier == Carrier::cosine && (m % 2 != 0)) sign = -1.0;
    return sign * w * f2 * bracket;
}

// Small-argument reduction of the resonant harmonic: Omega^(0) = w f^2 and
// Omega^(P>0) = (-1)^q Omega^(0) (Delta f^2 / 4 omega0)^q / (2 q!) with
// q = P/2 - 1 for the cosine carrier; the sine carrier replaces (-1)^q
// by -1. Only valid while |z| stays small, enforced at |z| <= 0.5.
inline double slow_rabi_smallz(const SystemParams& p, const PulseEnvelope& env,
                               double t_cycles, int order_p) {
    if (order_p < 0 || order_p % 2 != 0)
        throw std::invalid_argument("slow_rabi_smallz: order P must be even and >= 0");
    const double f = env.value(t_cycles);
    const double f2 = f * f;
    const double base = p.rabi_omega * p.rabi_m / (2.0 * p.omega21) * f2;
    if (order_p == 0) return base;
    const double quarter = 0.25 * static_stark_shift(p) * f2;
    if (!(std::fabs(2.0 * quarter) <= 0.5))
        throw std::domain_error("slow_rabi_smallz: |Delta f^2 / 2 omega0| exceeds 0.5");
    const int q = order_p / 2 - 1;
    double pow_fact = 0.5;
    for (int k = 1; k <= q; ++k) pow_fact *= quarter / k;
    const double sign = (p.carrier == Carrier::cosine) ? (q % 2 == 0 ? 1.0 : -1.0) : -1.0;
    return sign * base * pow_fact;
}

// Evaluator for S(t). The exact and Bessel forms depend on the cumulative
// pulse quadratures, which the caller provides (integrators carry them as
// part of their state, single-point queries get them from model::phases).
class CouplingFunction {
public:
    CouplingFunction(const SystemParams& p, const PulseEnvelope& env, CouplingMode mode)
        : p_(p), env_(env), mode_(mode) {
        if (mode_.kind == CouplingMode::Kind::bessel_truncated) {
            resolved_p_ = detect_resonance(p_).order_p;
            const int floor_n = std::abs(resolved_p_) / 2 + 2;
            if (mode_.n_max < 0) mode_.n_max = std::abs(resolved_p_) / 2 + 6;
            if (mode_.n_max < floor_n)
                throw std::invalid_argument(
                    "CouplingFunction: n_max must be >= |P|/2 + 2 = " +
                    std::to_string(floor_n));
        } else if (mode_.kind == CouplingMode::Kind::slow_only) {
            if (mode_.order_p % 2 != 0)
                throw std::invalid_argument("CouplingFunction: slow order P must be even");
            resolved_p_ = mode_.order_p;
        }
    }

    const CouplingMode& mode() const { return mode_; }
    int order_p() const { return resolved_p_; }

    cplx value(double t_cycles, double ff, double ffc) const {
        const double tau = two_pi * t_cycles;
        const double delta = static_stark_shift(p_);
        switch (mode_.kind) {
        case CouplingMode::Kind::exact: {
            const RabiPair w = instantaneous_rabi(p_, env_, t_cycles);
            double alpha;
            if (mode_.use_exact_alpha) {
                const double sgn = (p_.carrier == Carrier::cosine) ? 1.0 : -1.0;
                alpha = p_.omega31 * tau + delta * (ff + sgn * ffc);
            } else {
                const double f = env_.value(t_cycles);
                const double sgn = (p_.carrier == Carrier::cosine) ? 1.0 : -1.0;
                alpha = p_.omega31 * tau + delta * ff +
                        sgn * 0.5 * delta * f * f * std::sin(2.0 * tau);
            }
            return (w.omega * w.m / p_.omega21) * std::exp(cplx(0.0, -alpha));
        }
        case CouplingMode::Kind::bessel_truncated: {
            const double f = env_.value(t_cycles);
            const double f2 = f * f;
            const double w = p_.rabi_omega * p_.rabi_m / (2.0 * p_.omega21);
            const double z = 0.5 * delta * f2;
            const double sigma = (p_.carrier == Carrier::cosine) ? -1.0 : 1.0;
            cplx sum(0.0, 0.0);
            for (int n = -mode_.n_max; n <= mode_.n_max; ++n) {
                double bracket = bessel_j(n, z).value;
                if (n != 0) bracket -= n * bessel_j_over_z(n, z);
                double coeff = w * f2 * bracket;
                if (sigma < 0.0 && (n % 2 != 0)) coeff = -coeff;
                const double phase = (p_.omega31 - 2.0 * n) * tau + delta * ff;
                sum += coeff * std::exp(cplx(0.0, -phase));
            }
            return sum;
        }
        case CouplingMode::Kind::slow_only: {
            const double omega_p = slow_rabi_general(p_, env_, t_cycles, resolved_p_);
            if (!mode_.with_phase_factor) return cplx(omega_p, 0.0);
            return omega_p * std::exp(cplx(0.0, -delta * ff));
        }
        }
        throw std::logic_error("CouplingFunction: unreachable coupling kind");
    }

private:
    SystemParams p_;
    PulseEnvelope env_;
    CouplingMode mode_;
    int resolved_p_ = 0;
};

// Single-point coupling evaluation; quadratures are computed on the spot.
inline cplx coupling_s(const SystemParams& p, const PulseEnvelope& env,
                       double t_cycles, CouplingMode mode,
                       int steps_per_cycle = 400) {
    const CouplingFunction fn(p, env, mode);
    const PhaseSet ps = phases(p, env, t_cycles, steps_per_cycle);
    return fn.value(t_cycles, ps.ff, ps.ffc);
}

// Integrates the effective two-state system i du/dt = -S v,
// i dv/dt = -S* u from (1, 0), carrying the pulse quadratures as extra
// state so S(t) is evaluated consistently with the step in progress.
inline TimeSeries<TwoStateAmplitudes> integrate_two_state(
    const SystemParams& p, const PulseEnvelope& env, double t_end_cycles,
    CouplingMode mode, int steps_per_cycle = 400, int samples_per_cycle = 20) {
    p.validate();
    const auto g =
        detail::StepGrid::make(t_end_cycles, steps_per_cycle, samples_per_cycle);
    const CouplingFunction coupling(p, env, mode);

    // y = (u, v, ff, ffc); the last two are real-valued quadratures.
    const auto rhs = [&](double t, const std::array<cplx, 4>& y) {
        const cplx s = coupling.value(t, y[2].real(), y[3].real());
        const double f = env.value(t);
        const cplx i_tau(0.0, two_pi);
        return std::array<cplx, 4>{
            i_tau * (s * y[1]),
            i_tau * (std::conj(s) * y[0]),
            cplx(two_pi * f * f, 0.0),
            cplx(two_pi * f * f * std::cos(2.0 * two_pi * t), 0.0),
        };
    };

    TimeSeries<TwoStateAmplitudes> series;
    series.steps_per_cycle = steps_per_cycle;
    series.samples_per_cycle = samples_per_cycle;

    std::array<cplx, 4> y = {cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0),
                             cplx(0.0, 0.0)};
    series.t_cycles.push_back(0.0);
    series.samples.push_back({y[0], y[1], 0.0, 0.0});
    double max_drift = 0.0;
    for (long k = 0; k < g.n_steps; ++k) {
        y = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        const double drift = std::fabs(std::norm(y[0]) + std::norm(y[1]) - 1.0);
        if (drift > max_drift) max_drift = drift;
        if (drift > 1e-6)
            throw IntegratorError(
                "integrate_two_state: norm drift " + format_g12(drift) + " at t = " +
                format_g12((k + 1) * g.h_cycles) + " cycles exceeds 1e-6");
        if ((k + 1) % g.stride == 0) {
            series.t_cycles.push_back((k + 1) * g.h_cycles);
            series.samples.push_back({y[0], y[1], y[2].real(), y[3].real()});
        }
    }
    series.max_norm_drift = max_drift;
    return series;
}

// Maps slow amplitudes back to the bare frame, b1 = u e^{i theta} and
// b3 = v e^{-i phi} with the exact accumulated phases, and fills b2 with
// its adiabatic reconstruction.
inline AmplitudeState reconstruct_amplitudes(const SystemParams& p,
                                             const PulseEnvelope& env,
                                             const TwoStateAmplitudes& s,
                                             double t_cycles) {
    const double tau = two_pi * t_cycles;
    const double sgn = (p.carrier == Carrier::cosine) ? 1.0 : -1.0;
    const double quad = s.ff + sgn * s.ffc;
    const double theta = p.rabi_omega * p.rabi_omega / (2.0 * p.omega21) * quad;
    const double phi = p.omega31 * tau - p.rabi_m * p.rabi_m / (2.0 * p.omega21) * quad;
    AmplitudeState out;
    out.b1 = s.u * std::exp(cplx(0.0, theta));
    out.b3 = s.v * std::exp(cplx(0.0, -phi));
    out.b2 = adiabatic_b2(p, env, out.b1, out.b3, t_cycles);
    return out;
}

inline TimeSeries<AmplitudeState> reconstruct_amplitudes(
    const SystemParams& p, const PulseEnvelope& env,
    const TimeSeries<TwoStateAmplitudes>& series) {
    TimeSeries<AmplitudeState> out;
    out.t_cycles = series.t_cycles;
    out.steps_per_cycle = series.steps_per_cycle;
    out.samples_per_cycle = series.samples_per_cycle;
    out.max_norm_drift = series.max_norm_drift;
    out.convergence_delta = series.convergence_delta;
    out.samples.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        out.samples.push_back(
            reconstruct_amplitudes(p, env, series.samples[i], series.t_cycles[i]));
    return out;
}

} // namespace lambdasim
