// Orbital element sets and frame conversions for heliocentric two-body
// motion in canonical units (mu = 1 unless stated otherwise).
//
// Conventions on the singular sets:
//   e < 1e-12      -> argp = 0, true anomaly measured from the node line
//   i < 1e-12      -> raan = 0, node line taken along +x
//   position on z  -> azimuth 0 in the spherical/cylindrical frames
#pragma once

#include <cmath>

#include "ltfeas/errors.hpp"
#include "ltfeas/vec3.hpp"

namespace ltfeas::astro {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wrap angle to [0, 2pi).
inline double wrap_2pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

// Wrap angle to (-pi, pi].
inline double wrap_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

// Heliocentric Cartesian state. Mass rides along and is untouched by
// ballistic propagation.
struct StateVector {
    Vec3 position;   // AU
    Vec3 velocity;   // AU/TU
    double mass = 1.0;  // kg

    bool valid() const {
        return position.finite() && velocity.finite() &&
               position.norm2() > 0.0 && std::isfinite(mass) && mass > 0.0;
    }
};

struct ClassicalElements {
    double a = 1.0;     // semi-major axis, AU (negative for hyperbolic)
    double e = 0.0;
    double i = 0.0;     // rad
    double raan = 0.0;  // rad, [0, 2pi)
    double argp = 0.0;  // rad, [0, 2pi)
    double nu = 0.0;    // true anomaly, rad, [0, 2pi)
};

struct EquinoctialElements {
    double p_sl = 1.0;  // semi-latus rectum, AU
    double f = 0.0;
    double g = 0.0;
    double h = 0.0;
    double k = 0.0;
    double L = 0.0;     // true longitude, rad, [0, 2pi)
};

struct SphericalPV {
    double r = 0.0;
    double azimuth = 0.0;    // rad, [0, 2pi)
    double elevation = 0.0;  // rad, [-pi/2, pi/2]
    double v_r = 0.0;
    double v_az = 0.0;
    double v_el = 0.0;
};

struct CylindricalPV {
    double rho = 0.0;
    double theta = 0.0;  // rad, [0, 2pi)
    double z = 0.0;
    double v_rho = 0.0;
    double v_theta = 0.0;
    double v_z = 0.0;
};

inline constexpr double kParabolicTol = 1e-12;

inline StateVector elements_to_state(const ClassicalElements& coe, double mu = 1.0) {
    if (std::abs(coe.e - 1.0) <= kParabolicTol)
        throw unsupported_orbit_error("elements_to_state: parabolic orbit (e == 1)");

    const double p = coe.a * (1.0 - coe.e * coe.e);  // semi-latus rectum, > 0 both branches
    if (!(p > 0.0))
        throw input_error("elements_to_state: non-positive semi-latus rectum");

    const double cnu = std::cos(coe.nu), snu = std::sin(coe.nu);
    const double r = p / (1.0 + coe.e * cnu);

    // Perifocal position/velocity.
    const Vec3 r_pf{r * cnu, r * snu, 0.0};
    const double smup = std::sqrt(mu / p);
    const Vec3 v_pf{-smup * snu, smup * (coe.e + cnu), 0.0};

    // Rotate perifocal -> inertial: R3(-raan) R1(-i) R3(-argp).
    const double cO = std::cos(coe.raan), sO = std::sin(coe.raan);
    const double ci = std::cos(coe.i), si = std::sin(coe.i);
    const double cw = std::cos(coe.argp), sw = std::sin(coe.argp);

    auto rotate = [&](const Vec3& v) {
        const double x1 = cw * v.x - sw * v.y;
        const double y1 = sw * v.x + cw * v.y;
        const double z1 = v.z;
        const double x2 = x1;
        const double y2 = ci * y1 - si * z1;
        const double z2 = si * y1 + ci * z1;
        return Vec3{cO * x2 - sO * y2, sO * x2 + cO * y2, z2};
    };

    StateVector out;
    out.position = rotate(r_pf);
    out.velocity = rotate(v_pf);
    return out;
}

inline ClassicalElements state_to_elements(const StateVector& s, double mu = 1.0) {
    const Vec3& r = s.position;
    const Vec3& v = s.velocity;
    const double rn = r.norm();
    if (rn <= 0.0) throw input_error("state_to_elements: zero position");

    const Vec3 hv = r.cross(v);
    const double h = hv.norm();
    const Vec3 nv{-hv.y, hv.x, 0.0};  // node line = z x h
    const double n = nv.norm();

    const Vec3 ev = (r * (v.norm2() - mu / rn) - v * r.dot(v)) / mu;
    const double e = ev.norm();
    if (std::abs(e - 1.0) <= kParabolicTol)
        throw unsupported_orbit_error("state_to_elements: parabolic orbit (e == 1)");

    const double energy = 0.5 * v.norm2() - mu / rn;
    ClassicalElements coe;
    coe.a = -mu / (2.0 * energy);
    coe.e = e;
    coe.i = std::acos(std::clamp(hv.z / h, -1.0, 1.0));

    const bool equatorial = n < 1e-12 * h;
    const bool circular = e < 1e-12;

    if (equatorial) {
        coe.raan = 0.0;
        // Node taken along +x.
        if (circular) {
            coe.argp = 0.0;
            coe.nu = wrap_2pi(std::atan2(r.y * (hv.z >= 0.0 ? 1.0 : -1.0), r.x));
        } else {
            coe.argp = wrap_2pi(std::atan2(ev.y * (hv.z >= 0.0 ? 1.0 : -1.0), ev.x));
            double nu = std::acos(std::clamp(ev.dot(r) / (e * rn), -1.0, 1.0));
            if (r.dot(v) < 0.0) nu = kTwoPi - nu;
            coe.nu = wrap_2pi(nu);
        }
    } else {
        coe.raan = wrap_2pi(std::atan2(nv.y, nv.x));
        if (circular) {
            coe.argp = 0.0;
            double u = std::acos(std::clamp(nv.dot(r) / (n * rn), -1.0, 1.0));
            if (r.z < 0.0) u = kTwoPi - u;
            coe.nu = wrap_2pi(u);
        } else {
            double w = std::acos(std::clamp(nv.dot(ev) / (n * e), -1.0, 1.0));
            if (ev.z < 0.0) w = kTwoPi - w;
            coe.argp = wrap_2pi(w);
            double nu = std::acos(std::clamp(ev.dot(r) / (e * rn), -1.0, 1.0));
            if (r.dot(v) < 0.0) nu = kTwoPi - nu;
            coe.nu = wrap_2pi(nu);
        }
    }
    return coe;
}

inline EquinoctialElements coe_to_mee(const ClassicalElements& coe) {
    EquinoctialElements mee;
    mee.p_sl = coe.a * (1.0 - coe.e * coe.e);
    mee.f = coe.e * std::cos(coe.argp + coe.raan);
    mee.g = coe.e * std::sin(coe.argp + coe.raan);
    const double t = std::tan(coe.i / 2.0);
    mee.h = t * std::cos(coe.raan);
    mee.k = t * std::sin(coe.raan);
    mee.L = wrap_2pi(coe.raan + coe.argp + coe.nu);
    return mee;
}

inline ClassicalElements mee_to_coe(const EquinoctialElements& mee) {
    ClassicalElements coe;
    coe.e = std::sqrt(mee.f * mee.f + mee.g * mee.g);
    coe.a = mee.p_sl / (1.0 - coe.e * coe.e);
    const double t = std::sqrt(mee.h * mee.h + mee.k * mee.k);
    coe.i = 2.0 * std::atan(t);
    const double raan = (t < 1e-15) ? 0.0 : std::atan2(mee.k, mee.h);
    const double lon_peri = (coe.e < 1e-15) ? raan : std::atan2(mee.g, mee.f);
    coe.raan = wrap_2pi(raan);
    coe.argp = wrap_2pi(lon_peri - raan);
    coe.nu = wrap_2pi(mee.L - lon_peri);
    return coe;
}

// All three alternate representations of one Cartesian state.
struct Frames {
    EquinoctialElements mee;
    SphericalPV spherical;
    CylindricalPV cylindrical;
};

inline SphericalPV state_to_spherical(const StateVector& s) {
    const Vec3& p = s.position;
    const Vec3& v = s.velocity;
    SphericalPV sph;
    sph.r = p.norm();
    const double rho = std::hypot(p.x, p.y);
    sph.azimuth = rho < 1e-300 ? 0.0 : wrap_2pi(std::atan2(p.y, p.x));
    sph.elevation = std::asin(std::clamp(p.z / sph.r, -1.0, 1.0));

    const double ca = std::cos(sph.azimuth), sa = std::sin(sph.azimuth);
    const double ce = std::cos(sph.elevation), se = std::sin(sph.elevation);
    const Vec3 er{ca * ce, sa * ce, se};
    const Vec3 eaz{-sa, ca, 0.0};
    const Vec3 eel{-ca * se, -sa * se, ce};
    sph.v_r = v.dot(er);
    sph.v_az = v.dot(eaz);
    sph.v_el = v.dot(eel);
    return sph;
}

inline StateVector spherical_to_state(const SphericalPV& sph) {
    const double ca = std::cos(sph.azimuth), sa = std::sin(sph.azimuth);
    const double ce = std::cos(sph.elevation), se = std::sin(sph.elevation);
    const Vec3 er{ca * ce, sa * ce, se};
    const Vec3 eaz{-sa, ca, 0.0};
    const Vec3 eel{-ca * se, -sa * se, ce};
    StateVector s;
    s.position = er * sph.r;
    s.velocity = er * sph.v_r + eaz * sph.v_az + eel * sph.v_el;
    return s;
}

inline CylindricalPV state_to_cylindrical(const StateVector& s) {
    const Vec3& p = s.position;
    const Vec3& v = s.velocity;
    CylindricalPV cyl;
    cyl.rho = std::hypot(p.x, p.y);
    cyl.theta = cyl.rho < 1e-300 ? 0.0 : wrap_2pi(std::atan2(p.y, p.x));
    cyl.z = p.z;
    const double ct = std::cos(cyl.theta), st = std::sin(cyl.theta);
    cyl.v_rho = v.x * ct + v.y * st;
    cyl.v_theta = -v.x * st + v.y * ct;
    cyl.v_z = v.z;
    return cyl;
}

inline StateVector cylindrical_to_state(const CylindricalPV& cyl) {
    const double ct = std::cos(cyl.theta), st = std::sin(cyl.theta);
    StateVector s;
    s.position = {cyl.rho * ct, cyl.rho * st, cyl.z};
    s.velocity = {cyl.v_rho * ct - cyl.v_theta * st,
                  cyl.v_rho * st + cyl.v_theta * ct, cyl.v_z};
    return s;
}

inline Frames state_to_frames(const StateVector& s) {
    if (s.position.norm2() <= 0.0)
        throw input_error("state_to_frames: zero position");
    Frames fr;
    fr.mee = coe_to_mee(state_to_elements(s));
    fr.spherical = state_to_spherical(s);
    fr.cylindrical = state_to_cylindrical(s);
    return fr;
}

struct OrbitScalars {
    double h_mag = 0.0;   // |p x v|
    double energy = 0.0;  // v^2/2 - mu/|p|  (= -mu/2a)
    double r_sun = 0.0;   // |p|
};

inline OrbitScalars orbit_scalars(const StateVector& s, double mu = 1.0) {
    OrbitScalars out;
    out.h_mag = s.position.cross(s.velocity).norm();
    out.r_sun = s.position.norm();
    out.energy = 0.5 * s.velocity.norm2() - mu / out.r_sun;
    return out;
}

}  // namespace ltfeas::astro
