#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lambdasim/errors.hpp"
#include "lambdasim/model.hpp"
#include "lambdasim/timeseries.hpp"

namespace lambdasim {

inline double norm(const AmplitudeState& s) { return s.norm_sq(); }

namespace detail {

// Shared grid layout for all fixed-step integrations. Times are defined as
// k * h, never accumulated, so grids from different modules line up exactly.
struct StepGrid {
    long n_steps = 0;
    long stride = 0; // integration steps per stored sample
    double h_cycles = 0.0;

    static StepGrid make(double t_end_cycles, int steps_per_cycle,
                         int samples_per_cycle) {
        if (!(t_end_cycles > 0.0))
            throw std::invalid_argument("integration: t_end_cycles must be positive");
        if (steps_per_cycle < 100)
            throw std::invalid_argument("integration: steps_per_cycle must be >= 100");
        if (samples_per_cycle < 1 || samples_per_cycle > steps_per_cycle ||
            steps_per_cycle % samples_per_cycle != 0)
            throw std::invalid_argument(
                "integration: samples_per_cycle must divide steps_per_cycle");
        const double n_samples = t_end_cycles * samples_per_cycle;
        if (std::fabs(n_samples - std::llround(n_samples)) > 1e-9)
            throw std::invalid_argument(
                "integration: t_end_cycles must land on the output sample grid");
        StepGrid g;
        g.stride = steps_per_cycle / samples_per_cycle;
        g.n_steps = std::llround(t_end_cycles * steps_per_cycle);
        g.h_cycles = 1.0 / steps_per_cycle;
        return g;
    }
};

// One classical RK4 step of y' = rhs(t, y) over [t, t + h] in cycle time.
// The state is a flat array of complex numbers.
template <std::size_t N, class Rhs>
std::array<cplx, N> rk4_step(const Rhs& rhs, double t_cycles, double h,
                             const std::array<cplx, N>& y) {
    const std::array<cplx, N> k1 = rhs(t_cycles, y);
    std::array<cplx, N> tmp;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    const std::array<cplx, N> k2 = rhs(t_cycles + 0.5 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    const std::array<cplx, N> k3 = rhs(t_cycles + 0.5 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * k3[i];
    const std::array<cplx, N> k4 = rhs(t_cycles + h, tmp);
    std::array<cplx, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

// Amplitude equations. The evolution variable here is cycle time; the
// physical-time derivative picks up a factor 2 pi per cycle.
struct FullRhs {
    const SystemParams& p;
    const PulseEnvelope& env;

    std::array<cplx, 3> operator()(double t, const std::array<cplx, 3>& y) const {
        const RabiPair w = instantaneous_rabi(p, env, t);
        const cplx i_tau(0.0, two_pi);
        return {
            i_tau * (w.omega * y[1]),
            -i_tau * (p.omega21 * y[1] - w.omega * y[0] - w.m * y[2]),
            -i_tau * (p.omega31 * y[2] - w.m * y[1]),
        };
    }
};

struct FullRunResult {
    std::array<cplx, 3> final_state;
    double max_norm_drift = 0.0;
};

template <class SampleFn>
FullRunResult run_full(const SystemParams& p, const PulseEnvelope& env,
                       const StepGrid& g, SampleFn&& sample) {
    const FullRhs rhs{p, env};
    std::array<cplx, 3> y = {cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)};
    double max_drift = 0.0;
    sample(0L, y);
    for (long k = 0; k < g.n_steps; ++k) {
        y = rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        const double drift =
            std::fabs(std::norm(y[0]) + std::norm(y[1]) + std::norm(y[2]) - 1.0);
        if (drift > max_drift) max_drift = drift;
        if (drift > 1e-6)
            throw IntegratorError(
                "integrate_full: norm drift " + format_g12(drift) + " at t = " +
                format_g12((k + 1) * g.h_cycles) +
                " cycles exceeds 1e-6; increase steps_per_cycle");
        sample(k + 1, y);
    }
    return {y, max_drift};
}

} // namespace detail

// Integrates the exact three-amplitude equations from state (1, 0, 0) on a
// fixed grid, storing every (steps_per_cycle / samples_per_cycle)-th point.
// Norm is monitored, never renormalized. When halving_check is set (the
// default) the final populations are verified against a run at twice the
// resolution; the disagreement is stored as convergence_delta.
inline TimeSeries<AmplitudeState> integrate_full(const SystemParams& p,
                                                 const PulseEnvelope& env,
                                                 double t_end_cycles,
                                                 int steps_per_cycle = 400,
                                                 int samples_per_cycle = 20,
                                                 bool halving_check = true) {
    p.validate();
    const auto g = detail::StepGrid::make(t_end_cycles, steps_per_cycle,
                                          samples_per_cycle);
    TimeSeries<AmplitudeState> series;
    series.steps_per_cycle = steps_per_cycle;
    series.samples_per_cycle = samples_per_cycle;
    series.t_cycles.reserve(static_cast<std::size_t>(g.n_steps / g.stride) + 1);
    series.samples.reserve(series.t_cycles.capacity());

    const auto res = detail::run_full(
        p, env, g, [&](long k, const std::array<cplx, 3>& y) {
            if (k % g.stride != 0) return;
            series.t_cycles.push_back(k * g.h_cycles);
            series.samples.push_back({y[0], y[1], y[2]});
        });
    series.max_norm_drift = res.max_norm_drift;

    if (halving_check) {
        const auto g2 = detail::StepGrid::make(t_end_cycles, 2 * steps_per_cycle,
                                               samples_per_cycle);
        const auto fine =
            detail::run_full(p, env, g2, [](long, const std::array<cplx, 3>&) {});
        double delta = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double d =
                std::fabs(std::norm(res.final_state[j]) - std::norm(fine.final_state[j]));
            if (d > delta) delta = d;
        }
        series.convergence_delta = delta;
        if (delta > 1e-5)
            throw IntegratorError(
                "integrate_full: step-halving changed final populations by " +
                format_g12(delta) + "; increase steps_per_cycle");
    }
    return series;
}

// Integrates the nonlinear ratio equations for r = b2/b1 and rho = b3/b1
// from (0, 0). These blow up where b1 depletes; crossing the threshold
// raises SingularityError with the crossing time.
inline TimeSeries<RatioState> integrate_ratios(const SystemParams& p,
                                               const PulseEnvelope& env,
                                               double t_end_cycles,
                                               int steps_per_cycle = 400,
                                               int samples_per_cycle = 20,
                                               double blowup_threshold = 1e3) {
    p.validate();
    if (!(blowup_threshold > 0.0))
        throw std::invalid_argument("integrate_ratios: blowup_threshold must be positive");
    const auto g = detail::StepGrid::make(t_end_cycles, steps_per_cycle,
                                          samples_per_cycle);

    const auto rhs = [&p, &env](double t, const std::array<cplx, 2>& y) {
        const RabiPair w = instantaneous_rabi(p, env, t);
        const cplx& r = y[0];
        const cplx& rho = y[1];
        const cplx i_tau(0.0, two_pi);
        return std::array<cplx, 2>{
            -i_tau * ((r * r - 1.0) * w.omega + p.omega21 * r - w.m * rho),
            -i_tau * ((p.omega31 + w.omega * r) * rho - w.m * r),
        };
    };

    TimeSeries<RatioState> series;
    series.steps_per_cycle = steps_per_cycle;
    series.samples_per_cycle = samples_per_cycle;

    std::array<cplx, 2> y = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
    series.t_cycles.push_back(0.0);
    series.samples.push_back({y[0], y[1]});
    for (long k = 0; k < g.n_steps; ++k) {
        y = detail::rk4_step(rhs, k * g.h_cycles, g.h_cycles, y);
        if (std::abs(y[0]) > blowup_threshold || std::abs(y[1]) > blowup_threshold) {
            const double t_fail = (k + 1) * g.h_cycles;
            throw SingularityError(
                "integrate_ratios: |r| or |rho| exceeded " +
                    format_g12(blowup_threshold) + " at t = " + format_g12(t_fail) +
                    " cycles (b1 depleted)",
                t_fail);
        }
        if ((k + 1) % g.stride == 0) {
            series.t_cycles.push_back((k + 1) * g.h_cycles);
            series.samples.push_back({y[0], y[1]});
        }
    }
    return series;
}

} // namespace lambdasim
