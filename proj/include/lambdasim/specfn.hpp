#pragma once

#include <cmath>
#include <stdexcept>

namespace lambdasim {

// Bessel function value together with a conservative absolute-error
// estimate taken from two truncation depths of the same algorithm.
struct BesselResult {
    double value = 0.0;
    double est_abs_error = 0.0;
};

namespace detail {

// Ascending power series around z = 0, reliable for |z| < 1. Also returns
// the magnitude of the first omitted term as the error estimate.
// Requires n >= 0 and z >= 0.
inline BesselResult bessel_series(int n, double z) {
    const double halfz = 0.5 * z;
    double term = 1.0;
    for (int k = 1; k <= n; ++k) term *= halfz / k;
    double sum = term;
    double abs_sum = std::fabs(term);
    const double zz = halfz * halfz;
    int k = 1;
    for (; k <= 60 && term != 0.0; ++k) {
        term *= -zz / (static_cast<double>(k) * (n + k));
        sum += term;
        abs_sum += std::fabs(term);
        if (std::fabs(term) < 1e-18 * abs_sum) break;
    }
    const double omitted =
        std::fabs(term) * zz / (static_cast<double>(k + 1) * (n + k + 1));
    return {sum, omitted + 4e-16 * abs_sum};
}

// Miller backward recurrence from an even starting order, normalized with
// J0(z) + 2*sum_k J_{2k}(z) = 1. Requires 0 <= n < start and z > 0.
inline double bessel_miller(int n, double z, int start) {
    double above = 0.0;    // J_{m+1}
    double here = 1e-30;   // J_m, arbitrary seed
    double target = 0.0;
    double norm = 0.0;
    for (int m = start; m >= 1; --m) {
        const double below = (2.0 * m / z) * here - above;
        above = here;
        here = below;
        const int order = m - 1;
        if ((order & 1) == 0) norm += (order == 0) ? here : 2.0 * here;
        if (order == n) target = here;
        if (std::fabs(here) > 1e250) {
            here *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            target *= 1e-250;
        }
    }
    return target / norm;
}

} // namespace detail

// Jn(z) for integer order and real argument. Negative orders and arguments
// reduce to positive ones through Jn(-z) = (-1)^n Jn(z) and
// J_{-n}(z) = (-1)^n Jn(z). Power series below |z| = 1, Miller recurrence
// above; est_abs_error stays below 1e-12 for |z| <= 10.
inline BesselResult bessel_j(int n, double z) {
    if (!std::isfinite(z)) throw std::domain_error("bessel_j: z must be finite");
    double sign = 1.0;
    if (n < 0) {
        n = -n;
        if (n & 1) sign = -sign;
    }
    if (z < 0.0) {
        z = -z;
        if (n & 1) sign = -sign;
    }
    if (z == 0.0) return {n == 0 ? sign : 0.0, 0.0};

    BesselResult res;
    if (z < 1.0) {
        res = detail::bessel_series(n, z);
    } else {
        const int base = n > static_cast<int>(z) ? n : static_cast<int>(z);
        const int start = 2 * ((base + 22 + static_cast<int>(0.55 * z)) / 2);
        const double coarse = detail::bessel_miller(n, z, start);
        const double fine = detail::bessel_miller(n, z, start + 8);
        res.value = fine;
        res.est_abs_error = std::fabs(fine - coarse) + 1e-15;
    }
    res.value *= sign;
    return res;
}

// Leading-order small-argument form (z/2)^n / n!. Only justified for small
// z, so arguments beyond |z| = 0.5 are rejected rather than silently
// extrapolated.
inline double bessel_j_small(int n, double z) {
    if (n < 0) throw std::domain_error("bessel_j_small: order must be non-negative");
    if (!(std::fabs(z) <= 0.5))
        throw std::domain_error("bessel_j_small: |z| must be <= 0.5");
    double value = 1.0;
    const double halfz = 0.5 * z;
    for (int k = 1; k <= n; ++k) value *= halfz / k;
    return value;
}

// Regularized ratio Jn(z)/z, finite at z = 0 for |n| >= 1. The coupling
// coefficients need this ratio at arbitrarily small z, where plain division
// loses accuracy, so below |z| = 1e-4 the series form
// z^{n-1}/(2^n (n-1)! n) * (1 - z^2/(4(n+1))) is used instead.
inline double bessel_j_over_z(int n, double z) {
    if (std::fabs(z) >= 1e-4) return bessel_j(n, z).value / z;
    double sign = 1.0;
    int m = n;
    if (m < 0) {
        m = -m;
        if (m & 1) sign = -sign;
    }
    if (m == 0) throw std::domain_error("bessel_j_over_z: J0(z)/z is singular at z = 0");
    const double halfz = 0.5 * z;
    double value = 0.5 / m;
    for (int k = 1; k < m; ++k) value *= halfz / k;
    value *= 1.0 - z * z / (4.0 * (m + 1));
    return sign * value;
}

} // namespace lambdasim
