#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "lambdasim/model.hpp"
#include "lambdasim/timeseries.hpp"

namespace lambdasim {

// Induced dipole in units where the transition dipoles are proportional to
// the Rabi frequencies; only relative spectral heights are meaningful.
struct DipoleSeries {
    std::vector<double> t_cycles;
    std::vector<double> d;
    int samples_per_cycle = 0;
};

// d(t) = 2 w12 Re(b1* b2) + 2 w23 Re(b2* b3), w12 = Omega_R, w23 = M_R.
// Analytic trajectories must arrive with b2 already reconstructed
// adiabatically, which every series producer in this library does.
inline DipoleSeries induced_dipole(const TimeSeries<AmplitudeState>& traj,
                                   const SystemParams& p) {
    DipoleSeries dip;
    dip.t_cycles = traj.t_cycles;
    dip.samples_per_cycle = traj.samples_per_cycle;
    dip.d.reserve(traj.size());
    for (const AmplitudeState& s : traj.samples) {
        const double d12 = 2.0 * p.rabi_omega * std::real(std::conj(s.b1) * s.b2);
        const double d23 = 2.0 * p.rabi_m * std::real(std::conj(s.b2) * s.b3);
        dip.d.push_back(d12 + d23);
    }
    return dip;
}

// Power spectrum of the dipole over a finite window: the squared modulus
// of the discrete finite-time Fourier transform with a plain rectangular
// window, normalized to its maximum. peak_raw_power keeps the absolute
// scale so linearity and Parseval checks remain possible.
struct SpectrumData {
    std::vector<double> omega;  // in omega0 units
    std::vector<double> power;  // relative, max = 1
    double peak_raw_power = 0.0;
    double window_start_cycles = 0.0;
    double window_end_cycles = 0.0;
};

inline SpectrumData coherent_spectrum(const DipoleSeries& dip, double omega_max,
                                      int points_per_omega0,
                                      double window_start_cycles = 0.0,
                                      double window_end_cycles = -1.0) {
    if (dip.t_cycles.size() < 2)
        throw std::invalid_argument("coherent_spectrum: dipole series too short");
    if (!(omega_max > 0.0) || points_per_omega0 < 1)
        throw std::invalid_argument("coherent_spectrum: bad frequency grid request");
    const int rate = dip.samples_per_cycle;
    const int required = static_cast<int>(std::ceil(4.0 * omega_max));
    if (rate < required)
        throw std::invalid_argument(
            "coherent_spectrum: dipole sampled at " + std::to_string(rate) +
            " samples/cycle but omega_max = " + format_g12(omega_max) +
            " needs at least " + std::to_string(required) +
            " samples/cycle (Nyquist with 2x margin)");

    const double t_last = dip.t_cycles.back();
    if (window_end_cycles < 0.0) window_end_cycles = t_last;
    if (!(window_start_cycles >= 0.0) || !(window_end_cycles > window_start_cycles) ||
        window_end_cycles > t_last + 1e-9)
        throw std::invalid_argument("coherent_spectrum: bad window");

    const auto k_start =
        static_cast<std::size_t>(std::ceil(window_start_cycles * rate - 1e-9));
    auto k_end = static_cast<std::size_t>(std::floor(window_end_cycles * rate + 1e-9));
    if (k_end >= dip.t_cycles.size()) k_end = dip.t_cycles.size() - 1;

    SpectrumData spec;
    spec.window_start_cycles = dip.t_cycles[k_start];
    spec.window_end_cycles = dip.t_cycles[k_end];

    const double d_tau = two_pi / rate;
    const auto n_omega = static_cast<std::size_t>(
        std::llround(omega_max * points_per_omega0));
    spec.omega.reserve(n_omega + 1);
    spec.power.reserve(n_omega + 1);

    const double tau_start = two_pi * dip.t_cycles[k_start];
    for (std::size_t j = 0; j <= n_omega; ++j) {
        const double w = static_cast<double>(j) / points_per_omega0;
        // incremental rotation e^{i w tau_k}; the start phase only shifts
        // the transform's overall phase, not its modulus
        const cplx rot = std::exp(cplx(0.0, w * d_tau));
        cplx phase = std::exp(cplx(0.0, w * tau_start));
        cplx acc(0.0, 0.0);
        for (std::size_t k = k_start; k <= k_end; ++k) {
            acc += dip.d[k] * phase;
            phase *= rot;
        }
        acc *= d_tau;
        spec.omega.push_back(w);
        spec.power.push_back(std::norm(acc));
    }

    spec.peak_raw_power = *std::max_element(spec.power.begin(), spec.power.end());
    if (spec.peak_raw_power > 0.0) {
        for (double& v : spec.power) v /= spec.peak_raw_power;
    }
    return spec;
}

struct SpectrumPeak {
    double omega = 0.0;
    double power = 0.0;
};

// Local maxima above min_relative_height, thinned so no two survivors are
// closer than min_separation, strongest first.
inline std::vector<SpectrumPeak> find_peaks(const SpectrumData& spec,
                                            double min_relative_height,
                                            double min_separation) {
    std::vector<SpectrumPeak> candidates;
    for (std::size_t j = 1; j + 1 < spec.power.size(); ++j) {
        if (spec.power[j] < min_relative_height) continue;
        if (spec.power[j] >= spec.power[j - 1] && spec.power[j] > spec.power[j + 1])
            candidates.push_back({spec.omega[j], spec.power[j]});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const SpectrumPeak& a, const SpectrumPeak& b) {
                  return a.power > b.power;
              });
    std::vector<SpectrumPeak> peaks;
    for (const SpectrumPeak& c : candidates) {
        bool clear = true;
        for (const SpectrumPeak& kept : peaks) {
            if (std::fabs(kept.omega - c.omega) < min_separation) {
                clear = false;
                break;
            }
        }
        if (clear) peaks.push_back(c);
    }
    return peaks;
}

} // namespace lambdasim
