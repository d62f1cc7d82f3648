#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lambdasim/errors.hpp"
#include "lambdasim/timeseries.hpp"

namespace lambdasim {

// Oscillation of the driving field: cos(omega0 t) is the default, sin is
// kept as an option because the slow coupling coefficients change sign
// pattern between the two choices.
enum class Carrier { cosine, sine };

// Physical parameters of the three-level lambda system. All frequencies
// are stored in units of the carrier frequency omega0; omega0 itself is
// recorded only so that file input given in absolute units can be restored
// on output. The level layout requires |omega31| < omega21 and a carrier
// far below the arm transition, omega21 >> omega0.
struct SystemParams {
    double omega0 = 1.0;
    double omega21 = 0.0;
    double omega31 = 0.0;
    double rabi_omega = 0.0; // Omega_R, couples 1 <-> 2
    double rabi_m = 0.0;     // M_R, couples 2 <-> 3
    Carrier carrier = Carrier::cosine;

    double omega23() const { return omega21 - omega31; }

    // Throws on violations of the lambda hierarchy, returns soft warnings.
    std::vector<std::string> validate() const {
        if (!(omega0 > 0.0))
            throw std::invalid_argument("SystemParams: omega0 must be positive");
        if (!(omega21 >= 5.0))
            throw std::invalid_argument(
                "SystemParams: omega21 must be >= 5 omega0 (multiphoton regime)");
        if (!(std::fabs(omega31) < omega21))
            throw std::invalid_argument(
                "SystemParams: |omega31| must be < omega21 (lambda configuration)");
        if (rabi_omega < 0.0 || rabi_m < 0.0)
            throw std::invalid_argument("SystemParams: Rabi frequencies must be >= 0");
        std::vector<std::string> warnings;
        if (omega21 < 10.0)
            warnings.push_back("omega21/omega0 = " + format_g12(omega21) +
                               " is below 10; adiabatic elimination of state 2 is marginal");
        return warnings;
    }
};

// Dimensionless pulse shape f(t), 0 <= f <= 1, f(0) = 0. Two families:
// a quarter-sine ramp that settles at 1, and a smooth squared-exponential
// peak that reaches 1 at t = tau and decays afterwards.
struct PulseEnvelope {
    enum class Shape { sine_ramp_flat, smooth_squared_exp };

    Shape shape = Shape::sine_ramp_flat;
    double shape_cycles = 1.0; // rise time or peak position, in cycles

    static PulseEnvelope sine_ramp_flat(double rise_cycles) {
        if (!(rise_cycles > 0.0))
            throw std::invalid_argument("PulseEnvelope: rise_cycles must be positive");
        return {Shape::sine_ramp_flat, rise_cycles};
    }

    static PulseEnvelope smooth_squared_exp(double tau_cycles) {
        if (!(tau_cycles > 0.0))
            throw std::invalid_argument("PulseEnvelope: tau_cycles must be positive");
        return {Shape::smooth_squared_exp, tau_cycles};
    }

    double value(double t_cycles) const {
        if (t_cycles < 0.0)
            throw std::domain_error("PulseEnvelope: t_cycles must be >= 0");
        if (shape == Shape::sine_ramp_flat) {
            if (t_cycles >= shape_cycles) return 1.0;
            return std::sin(0.5 * pi * t_cycles / shape_cycles);
        }
        const double x = t_cycles / shape_cycles;
        return x * x * std::exp(1.0 - x * x);
    }

    static constexpr double pi = 0.5 * two_pi;
};

inline double envelope_value(const PulseEnvelope& env, double t_cycles) {
    return env.value(t_cycles);
}

// One-photon couplings at time t: Omega(t) = Omega_R f(t) c(omega0 t) and
// M(t) = M_R f(t) c(omega0 t), with c the carrier function. The carrier
// argument omega0 t equals 2 pi t_cycles independent of units.
struct RabiPair {
    double omega = 0.0;
    double m = 0.0;
};

inline RabiPair instantaneous_rabi(const SystemParams& p, const PulseEnvelope& env,
                                   double t_cycles) {
    const double phase = two_pi * t_cycles;
    const double c =
        (p.carrier == Carrier::cosine) ? std::cos(phase) : std::sin(phase);
    const double fe = env.value(t_cycles) * c;
    return {p.rabi_omega * fe, p.rabi_m * fe};
}

// Combined static Stark shift Delta = (Omega_R^2 - M_R^2) / (2 omega21),
// the net cycle-averaged light shift between states 1 and 3.
inline double static_stark_shift(const SystemParams& p) {
    return (p.rabi_omega * p.rabi_omega - p.rabi_m * p.rabi_m) / (2.0 * p.omega21);
}

// Nearest dynamic even-photon resonance: P solves omega31 + Delta ~ P omega0
// with P even (negative when omega31 < 0). Both detunings are reported in
// omega0 units; the dynamic one is at most omega0/2 * 2 = omega0 in size.
struct ResonanceInfo {
    int order_p = 0;
    double dynamic_detuning = 0.0; // omega31 + Delta - P omega0
    double bare_detuning = 0.0;    // omega31 - P omega0
    bool ambiguous = false;        // exact midpoint between two even orders
};

inline ResonanceInfo detect_resonance(const SystemParams& p) {
    const double x = p.omega31 + static_stark_shift(p);
    const double half = 0.5 * x;
    ResonanceInfo info;
    const double lo = std::floor(half);
    if (half - lo == 0.5) {
        // midpoint: prefer the order of smaller magnitude
        const double a = 2.0 * lo;
        const double b = a + 2.0;
        info.order_p = static_cast<int>(std::fabs(a) <= std::fabs(b) ? a : b);
        info.ambiguous = true;
    } else {
        info.order_p = 2 * static_cast<int>(std::lround(half));
    }
    info.dynamic_detuning = x - info.order_p;
    info.bare_detuning = p.omega31 - info.order_p;
    return info;
}

namespace detail {

// Cumulative Simpson quadrature of g(t_cycles) d(tau) with tau = 2 pi t,
// on steps of 1/steps_per_cycle plus one partial step up to t. Simpson on
// smooth integrands matches the RK4 grid accuracy used elsewhere.
template <class Fn>
double cumulative_quadrature(Fn g, double t_cycles, int steps_per_cycle) {
    const double h = 1.0 / steps_per_cycle;
    const auto n_full = static_cast<long>(std::floor(t_cycles * steps_per_cycle));
    double acc = 0.0;
    for (long k = 0; k < n_full; ++k) {
        const double a = k * h;
        acc += g(a) + 4.0 * g(a + 0.5 * h) + g(a + h);
    }
    acc *= h / 6.0;
    const double a = n_full * h;
    const double w = t_cycles - a;
    if (w > 1e-14) acc += (w / 6.0) * (g(a) + 4.0 * g(a + 0.5 * w) + g(t_cycles));
    return two_pi * acc;
}

} // namespace detail

// Accumulated phases of the reduced description at one instant. ff and ffc
// are the two pulse quadratures on the physical time axis,
// ff = int f^2 dtau and ffc = int f^2 cos(2 omega0 t) dtau; everything else
// is a closed-form combination of them.
struct PhaseSet {
    double theta = 0.0;       // Stark phase of state 1, int Omega^2/omega21
    double phi = 0.0;         // phase of state 3, int (omega31 - M^2/omega21)
    double delta_t = 0.0;     // Delta * ff
    double alpha_exact = 0.0; // theta + phi via quadrature
    double alpha_approx = 0.0;// slow part plus the bounded sin(2 omega0 t) term
    double theta_avg = 0.0;   // cycle-averaged theta (ff only)
    double phi_avg = 0.0;     // cycle-averaged phi
    double ff = 0.0;
    double ffc = 0.0;
    double quad_rel_error = 0.0; // Richardson estimate from step halving
};

// Evaluates all accumulated phases at t by cumulative quadrature on the
// solver grid, with a half-step Richardson check (relative target 1e-8,
// hard failure above 1e-6).
inline PhaseSet phases(const SystemParams& p, const PulseEnvelope& env,
                       double t_cycles, int steps_per_cycle = 400) {
    if (t_cycles < 0.0) throw std::domain_error("phases: t_cycles must be >= 0");
    if (steps_per_cycle < 2)
        throw std::invalid_argument("phases: steps_per_cycle must be >= 2");

    const auto f2 = [&env](double t) {
        const double f = env.value(t);
        return f * f;
    };
    const auto f2c = [&env](double t) {
        const double f = env.value(t);
        return f * f * std::cos(2.0 * two_pi * t);
    };

    const double ff1 = detail::cumulative_quadrature(f2, t_cycles, steps_per_cycle);
    const double ff2 = detail::cumulative_quadrature(f2, t_cycles, 2 * steps_per_cycle);
    const double ffc1 = detail::cumulative_quadrature(f2c, t_cycles, steps_per_cycle);
    const double ffc2 = detail::cumulative_quadrature(f2c, t_cycles, 2 * steps_per_cycle);

    const double scale = std::max(1.0, std::fabs(ff2));
    const double rel = std::max(std::fabs(ff2 - ff1), std::fabs(ffc2 - ffc1)) / scale;
    if (rel > 1e-6)
        throw IntegratorError("phases: quadrature failed the step-halving check, rel error " +
                              format_g12(rel));

    PhaseSet ps;
    ps.ff = ff2;
    ps.ffc = ffc2;
    ps.quad_rel_error = rel;

    const double tau = two_pi * t_cycles;
    const double sgn = (p.carrier == Carrier::cosine) ? 1.0 : -1.0;
    const double w_omega = p.rabi_omega * p.rabi_omega / (2.0 * p.omega21);
    const double w_m = p.rabi_m * p.rabi_m / (2.0 * p.omega21);
    const double delta = static_stark_shift(p);
    const double f_now = env.value(t_cycles);

    ps.theta = w_omega * (ps.ff + sgn * ps.ffc);
    ps.phi = p.omega31 * tau - w_m * (ps.ff + sgn * ps.ffc);
    ps.theta_avg = w_omega * ps.ff;
    ps.phi_avg = p.omega31 * tau - w_m * ps.ff;
    ps.delta_t = delta * ps.ff;
    ps.alpha_exact = ps.theta + ps.phi;
    ps.alpha_approx = p.omega31 * tau + ps.delta_t +
                      sgn * 0.5 * delta * f_now * f_now * std::sin(2.0 * tau);
    return ps;
}

} // namespace lambdasim
