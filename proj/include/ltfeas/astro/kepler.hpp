// Universal-variable Kepler propagation (elliptic and hyperbolic).
//
// The universal anomaly chi is found by safeguarded Newton iteration on
//   F(chi) = (r0.v0)/sqrt(mu) chi^2 C(z) + (1 - r0/a) chi^3 S(z) + r0 chi
//          - sqrt(mu) dt,      z = alpha chi^2,
// whose derivative F'(chi) = r(chi) > 0, so F is strictly monotone and a
// bisection bracket can always be recovered. Elliptic spans are first
// reduced modulo the orbital period, which keeps chi small for long
// propagations.
#pragma once

#include <cmath>

#include "ltfeas/astro/elements.hpp"
#include "ltfeas/errors.hpp"

namespace ltfeas::astro {

// Stumpff functions C(z) and S(z); series expansion near z = 0.
inline void stumpff(double z, double& c, double& s) {
    if (std::abs(z) < 1e-5) {
        // C = 1/2 - z/24 + z^2/720 - z^3/40320
        c = 0.5 + z * (-1.0 / 24.0 + z * (1.0 / 720.0 - z / 40320.0));
        // S = 1/6 - z/120 + z^2/5040 - z^3/362880
        s = 1.0 / 6.0 + z * (-1.0 / 120.0 + z * (1.0 / 5040.0 - z / 362880.0));
    } else if (z > 0.0) {
        const double sz = std::sqrt(z);
        c = (1.0 - std::cos(sz)) / z;
        s = (sz - std::sin(sz)) / (z * sz);
    } else {
        const double sz = std::sqrt(-z);
        c = (std::cosh(sz) - 1.0) / (-z);
        s = (std::sinh(sz) - sz) / (-z * sz);
    }
}

inline StateVector kepler_propagate(const StateVector& state, double dt, double mu = 1.0) {
    if (dt == 0.0) return state;

    const Vec3 r0 = state.position;
    const Vec3 v0 = state.velocity;
    const double rn0 = r0.norm();
    const double smu = std::sqrt(mu);
    const double rdotv = r0.dot(v0);
    const double alpha = 2.0 / rn0 - v0.norm2() / mu;  // 1/a

    // Elliptic orbits repeat; fold the span into one period.
    double span = dt;
    if (alpha > 1e-12) {
        const double period = kTwoPi / (smu * alpha * std::sqrt(alpha));
        span = std::fmod(dt, period);
        if (span == 0.0) span = dt > 0.0 ? period : -period;
    }

    // Initial guess (Vallado).
    double chi;
    if (alpha > 1e-6) {
        chi = smu * span * alpha;
    } else if (alpha < -1e-6) {
        const double a = 1.0 / alpha;
        const double num = -2.0 * mu * alpha * span;
        const double den =
            rdotv + (span > 0.0 ? 1.0 : -1.0) * std::sqrt(-mu * a) * (1.0 - rn0 * alpha);
        chi = (span > 0.0 ? 1.0 : -1.0) * std::sqrt(-a) * std::log(std::abs(num / den));
        if (!std::isfinite(chi)) chi = smu * span / rn0;
    } else {
        chi = smu * span / rn0;  // near-parabolic
    }

    const double target = smu * span;
    double lo = 0.0, hi = 0.0;      // bisection bracket once found
    bool have_lo = false, have_hi = false;

    double fval = 0.0, c = 0.0, s = 0.0, z = 0.0, r = rn0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        z = alpha * chi * chi;
        stumpff(z, c, s);
        const double chi2 = chi * chi;
        fval = rdotv / smu * chi2 * c + (1.0 - rn0 * alpha) * chi2 * chi * s +
               rn0 * chi - target;
        r = chi2 * c + rdotv / smu * chi * (1.0 - z * s) + rn0 * (1.0 - z * c);

        if (fval > 0.0) { hi = chi; have_hi = true; }
        else            { lo = chi; have_lo = true; }

        const double step = fval / r;
        double next = chi - step;
        // Newton outside the bracket -> bisect.
        if (have_lo && have_hi && (next <= std::min(lo, hi) || next >= std::max(lo, hi)))
            next = 0.5 * (lo + hi);
        if (std::abs(next - chi) <= 1e-13 * std::max(1.0, std::abs(chi))) {
            chi = next;
            converged = true;
            break;
        }
        chi = next;
    }
    if (!converged)
        throw numerical_error("kepler_propagate: universal-variable iteration stalled",
                              std::abs(fval));

    z = alpha * chi * chi;
    stumpff(z, c, s);
    const double chi2 = chi * chi;
    r = chi2 * c + rdotv / smu * chi * (1.0 - z * s) + rn0 * (1.0 - z * c);

    const double f = 1.0 - chi2 * c / rn0;
    const double g = span - chi2 * chi * s / smu;
    const double fdot = smu * chi * (z * s - 1.0) / (r * rn0);
    const double gdot = 1.0 - chi2 * c / r;

    StateVector out;
    out.position = r0 * f + v0 * g;
    out.velocity = r0 * fdot + v0 * gdot;
    out.mass = state.mass;
    return out;
}

}  // namespace ltfeas::astro
