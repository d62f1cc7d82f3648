#pragma once

#include <complex>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lambdasim {

using cplx = std::complex<double>;

// All driving-field frequencies are expressed in units of the carrier
// frequency omega0, and all times in optical cycles (t_phys = 2*pi*t_cycles
// when omega0 = 1). Integrators work on the physical time axis internally
// but report the cycle axis, which is the natural one for plots and CSV.
inline constexpr double two_pi = 6.283185307179586476925286766559;

inline double cycles_to_phys(double t_cycles) { return two_pi * t_cycles; }
inline double phys_to_cycles(double t_phys) { return t_phys / two_pi; }

// Amplitudes of the three bare states; |b1|^2 + |b2|^2 + |b3|^2 = 1 for the
// exact dynamics.
struct AmplitudeState {
    cplx b1{1.0, 0.0};
    cplx b2{0.0, 0.0};
    cplx b3{0.0, 0.0};

    double norm_sq() const {
        return std::norm(b1) + std::norm(b2) + std::norm(b3);
    }
};

// Ratios r = b2/b1 and rho = b3/b1, finite as long as b1 stays populated.
struct RatioState {
    cplx r{0.0, 0.0};
    cplx rho{0.0, 0.0};

    // Population of state 1 reconstructed from the ratios alone.
    double p1() const { return 1.0 / (1.0 + std::norm(r) + std::norm(rho)); }
};

// Slow amplitudes of the effective two-state problem (u ~ b1, v ~ b3 with
// the fast phases removed). The two cumulative pulse quadratures that the
// non-autonomous coupling depends on ride along with the state, so any
// sample can be mapped back to bare amplitudes without re-integration.
struct TwoStateAmplitudes {
    cplx u{1.0, 0.0};
    cplx v{0.0, 0.0};
    double ff = 0.0;  // int f^2 d(omega0 t)
    double ffc = 0.0; // int f^2 cos(2 omega0 t) d(omega0 t)
};

// Uniformly sampled trajectory. The grid is defined by the step count, not
// by accumulated addition, so t_cycles[k] is reproducible bit for bit.
template <class State>
struct TimeSeries {
    std::vector<double> t_cycles;
    std::vector<State> samples;
    int steps_per_cycle = 0;   // resolution of the underlying integration
    int samples_per_cycle = 0; // resolution of the stored output
    double max_norm_drift = 0.0;    // max |norm - 1| seen on the fine grid
    double convergence_delta = 0.0; // step-halving disagreement, if checked

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    const State& front() const { return samples.front(); }
    const State& back() const { return samples.back(); }

    // Index of the sample closest to the requested time.
    std::size_t index_near(double t) const {
        if (empty()) throw std::out_of_range("TimeSeries::index_near on empty series");
        if (t <= t_cycles.front()) return 0;
        if (t >= t_cycles.back()) return size() - 1;
        const double dt = t_cycles[1] - t_cycles[0];
        auto k = static_cast<std::size_t>(t / dt + 0.5);
        if (k >= size()) k = size() - 1;
        return k;
    }
};

// Shortest round-trippable decimal form, fixed at 12 significant digits so
// output files are byte-identical across runs and platforms.
inline std::string format_g12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return std::string(buf);
}

// Writes a CSV table with LF line endings. The comment, when non-empty, is
// emitted first as a single '#' line (used for the resolved scenario JSON).
// row(i) must return one value per column name.
template <class RowFn>
void write_csv(std::ostream& os, const std::string& comment,
               const std::vector<std::string>& columns, std::size_t n_rows,
               RowFn row) {
    if (!comment.empty()) os << "# " << comment << "\n";
    for (std::size_t c = 0; c < columns.size(); ++c) {
        os << columns[c] << (c + 1 < columns.size() ? "," : "");
    }
    os << "\n";
    for (std::size_t i = 0; i < n_rows; ++i) {
        const std::vector<double> vals = row(i);
        if (vals.size() != columns.size())
            throw std::logic_error("write_csv: row width does not match header");
        for (std::size_t c = 0; c < vals.size(); ++c) {
            os << format_g12(vals[c]) << (c + 1 < vals.size() ? "," : "");
        }
        os << "\n";
    }
}

} // namespace lambdasim
