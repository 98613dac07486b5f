// Zero-revolution Lambert solver, universal-variables formulation.
//
// Iterates on z = alpha chi^2 with
//   y(z)  = r1 + r2 + A (z S(z) - 1) / sqrt(C(z)),
//   t(z)  = (chi^3 S(z) + A sqrt(y)) / sqrt(mu),  chi = sqrt(y / C),
// where A = sin(dtheta) sqrt(r1 r2 / (1 - cos dtheta)). t is monotone
// increasing in z on the zero-rev branch, so plain bisection with a
// y > 0 guard is enough and is deterministic.
#pragma once

#include <cmath>
#include <utility>

#include "ltfeas/astro/kepler.hpp"
#include "ltfeas/errors.hpp"

namespace ltfeas::astro {

struct LambertSolution {
    Vec3 v1;
    Vec3 v2;
};

inline LambertSolution lambert_solve(const Vec3& r1, const Vec3& r2, double tof,
                                     bool prograde = true, double mu = 1.0) {
    if (!(tof > 0.0)) throw input_error("lambert_solve: tof must be positive");

    const double rn1 = r1.norm(), rn2 = r2.norm();
    if (rn1 <= 0.0 || rn2 <= 0.0) throw input_error("lambert_solve: zero radius");

    const double cos_dth = std::clamp(r1.dot(r2) / (rn1 * rn2), -1.0, 1.0);
    const Vec3 cr = r1.cross(r2);
    const double sin_mag = cr.norm() / (rn1 * rn2);
    if (sin_mag < 1e-10)
        throw degenerate_geometry_error(
            "lambert_solve: transfer angle within 1e-10 of 0 or pi");

    // Transfer angle in [0, 2pi) measured in the requested sense.
    double dth = std::acos(cos_dth);
    const bool above = cr.z >= 0.0;
    if (prograde != above) dth = kTwoPi - dth;

    const double A = std::sin(dth) * std::sqrt(rn1 * rn2 / (1.0 - cos_dth));

    const double z_top = kTwoPi * kTwoPi - 1e-9;
    auto eval = [&](double z, double& t_out) -> bool {
        double c, s;
        stumpff(z, c, s);
        const double y = rn1 + rn2 + A * (z * s - 1.0) / std::sqrt(c);
        if (!(y > 0.0)) return false;
        const double chi = std::sqrt(y / c);
        t_out = (chi * chi * chi * s + A * std::sqrt(y)) / std::sqrt(mu);
        return std::isfinite(t_out);
    };

    // Bracket: expand the lower end until t(lo) < tof or y goes invalid.
    double hi = z_top;
    double lo = -z_top;
    double t_probe;
    for (int k = 0; k < 40; ++k) {
        if (!eval(lo, t_probe) || t_probe < tof) break;
        hi = lo;
        lo *= 4.0;
        if (k == 39)
            throw numerical_error("lambert_solve: failed to bracket time of flight", tof);
    }

    double z = 0.0;
    for (int it = 0; it < 160; ++it) {
        z = 0.5 * (lo + hi);
        if (!eval(z, t_probe) || t_probe < tof) lo = z;
        else hi = z;
        if (hi - lo <= 1e-14 * std::max(1.0, std::abs(hi))) break;
    }
    z = 0.5 * (lo + hi);
    if (!eval(z, t_probe) || std::abs(t_probe - tof) > 1e-6 * tof)
        throw numerical_error("lambert_solve: iteration did not converge",
                              std::abs(t_probe - tof));

    double c, s;
    stumpff(z, c, s);
    const double y = rn1 + rn2 + A * (z * s - 1.0) / std::sqrt(c);

    const double f = 1.0 - y / rn1;
    const double g = A * std::sqrt(y / mu);
    const double gdot = 1.0 - y / rn2;

    LambertSolution sol;
    sol.v1 = (r2 - r1 * f) / g;
    sol.v2 = (r2 * gdot - r1) / g;
    return sol;
}

}  // namespace ltfeas::astro
