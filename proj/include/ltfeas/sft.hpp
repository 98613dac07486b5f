#pragma once

// Sims-Flanagan transcription of a low-thrust rendezvous: the transfer is cut
// into equal-duration segments, each modeled as coast / bounded impulse at the
// segment center / coast. The first ceil(n/2) segments propagate forward from
// departure, the rest backward from arrival, and the two legs must agree at
// the match point (position, velocity, and mass).

#include <cmath>
#include <cstddef>
#include <ostream>
#include <utility>
#include <vector>

#include "ltfeas/astro/kepler.hpp"
#include "ltfeas/constants.hpp"
#include "ltfeas/errors.hpp"
#include "ltfeas/vec3.hpp"

namespace ltfeas::sft {

enum class Direction { forward, backward };

struct SFProblem {
    astro::StateVector departure_state;  // canonical pos/vel; mass slot unused (m0 below)
    Vec3 arrival_position;               // canonical
    Vec3 arrival_velocity;               // canonical
    double m0 = 0.0;                     // wet mass at departure, kg
    double m_dry = 0.0;                  // kg
    double tof_days = 0.0;
    int n_segments = 0;
    double t_max_n = 0.0;                // max thrust, N
    double isp_s = 0.0;                  // s
    double g0_ms2 = kG0;

    void validate() const {
        if (n_segments < 2) throw input_error("SFProblem: n_segments must be >= 2");
        if (!(tof_days > 0.0)) throw input_error("SFProblem: tof must be positive");
        if (!(m0 > m_dry) || !(m_dry > 0.0))
            throw input_error("SFProblem: need m0 > m_dry > 0");
        if (!(t_max_n > 0.0)) throw input_error("SFProblem: t_max must be positive");
        if (!(isp_s > 0.0)) throw input_error("SFProblem: isp must be positive");
    }

    int forward_segments() const { return (n_segments + 1) / 2; }
    int backward_segments() const { return n_segments - forward_segments(); }
    double tof_tu() const { return days_to_tu(tof_days); }
    double seg_dt_tu() const { return tof_tu() / n_segments; }
    double seg_dt_s() const { return tof_days * kSecondsPerDay / n_segments; }
    double match_time_tu() const { return seg_dt_tu() * forward_segments(); }
    double exhaust_velocity_ms() const { return isp_s * g0_ms2; }
};

struct DecisionVector {
    std::vector<Vec3> controls;  // one per segment, each component in [-1,1], |u| <= 1
    double m_f = 0.0;            // arrival mass, kg
};

struct MatchDefect {
    Vec3 dp;          // forward minus backward position at the match point
    Vec3 dv;          // forward minus backward velocity
    double dm = 0.0;  // (m_fwd - m_bwd) / m0

    double inf_norm() const {
        double m = std::abs(dm);
        m = std::max(m, std::abs(dp.x));
        m = std::max(m, std::abs(dp.y));
        m = std::max(m, std::abs(dp.z));
        m = std::max(m, std::abs(dv.x));
        m = std::max(m, std::abs(dv.y));
        m = std::max(m, std::abs(dv.z));
        return m;
    }
};

// Center-of-segment impulse. The kick magnitude is T_max*|u|*seg_dt / m with m
// the mass carried into the impulse on the current leg; mass follows the
// rocket equation. On the backward leg the kick is removed and mass grows,
// using the backward-carried (post-impulse) mass in the dv formula -- the
// small asymmetry of that convention cancels at defect-zero solutions.
inline astro::StateVector apply_impulse(const astro::StateVector& state, const Vec3& u,
                                        double seg_dt_tu, const SFProblem& problem,
                                        Direction direction) {
    const double u_norm = u.norm();
    if (u_norm == 0.0) return state;

    const double seg_dt_s = seg_dt_tu * kTuSeconds;
    const double dv_mps = problem.t_max_n * u_norm * seg_dt_s / state.mass;
    const double ve = problem.exhaust_velocity_ms();
    const Vec3 kick = u * (kms_to_vu(dv_mps / 1000.0) / u_norm);

    astro::StateVector out = state;
    if (direction == Direction::forward) {
        out.velocity = state.velocity + kick;
        out.mass = state.mass * std::exp(-dv_mps / ve);
        if (out.mass < problem.m_dry)
            throw infeasible_mass_error("impulse drains mass below dry mass");
    } else {
        out.velocity = state.velocity - kick;
        out.mass = state.mass * std::exp(dv_mps / ve);
    }
    return out;
}

// Propagate one leg to the match point at tof*ceil(n/2)/n. Forward starts at
// the departure state with mass m0; backward starts at the arrival state with
// mass m_f and walks segments n-1 .. ceil(n/2) in reverse time.
inline astro::StateVector propagate_leg(const SFProblem& problem,
                                        const DecisionVector& decision,
                                        Direction direction) {
    const double dt = problem.seg_dt_tu();
    const double half = 0.5 * dt;
    const int n_fwd = problem.forward_segments();

    astro::StateVector s;
    if (direction == Direction::forward) {
        s = problem.departure_state;
        s.mass = problem.m0;
        for (int i = 0; i < n_fwd; ++i) {
            s = astro::kepler_propagate(s, half);
            s = apply_impulse(s, decision.controls[static_cast<std::size_t>(i)], dt,
                              problem, Direction::forward);
            s = astro::kepler_propagate(s, half);
        }
    } else {
        s.position = problem.arrival_position;
        s.velocity = problem.arrival_velocity;
        s.mass = decision.m_f;
        for (int i = problem.n_segments - 1; i >= n_fwd; --i) {
            s = astro::kepler_propagate(s, -half);
            s = apply_impulse(s, decision.controls[static_cast<std::size_t>(i)], dt,
                              problem, Direction::backward);
            s = astro::kepler_propagate(s, -half);
        }
    }
    return s;
}

inline MatchDefect match_defect(const SFProblem& problem, const DecisionVector& decision) {
    const auto f = propagate_leg(problem, decision, Direction::forward);
    const auto b = propagate_leg(problem, decision, Direction::backward);
    return {f.position - b.position, f.velocity - b.velocity, (f.mass - b.mass) / problem.m0};
}

// Minimization form of "maximize final mass".
inline double objective(const SFProblem& problem, const DecisionVector& decision) {
    return -decision.m_f / problem.m0;
}

// Flat layout: [u0x u0y u0z ... u(n-1)z, m_f/m0], length 3n+1.
inline std::size_t flat_size(const SFProblem& problem) {
    return 3 * static_cast<std::size_t>(problem.n_segments) + 1;
}

inline std::vector<double> encode_decision(const SFProblem& problem,
                                           const DecisionVector& decision) {
    if (decision.controls.size() != static_cast<std::size_t>(problem.n_segments))
        throw shape_error("encode_decision: control count does not match n_segments");
    std::vector<double> x(flat_size(problem));
    for (std::size_t i = 0; i < decision.controls.size(); ++i) {
        x[3 * i + 0] = decision.controls[i].x;
        x[3 * i + 1] = decision.controls[i].y;
        x[3 * i + 2] = decision.controls[i].z;
    }
    x.back() = decision.m_f / problem.m0;
    return x;
}

inline void decode_decision_into(const SFProblem& problem, const std::vector<double>& x,
                                 DecisionVector& out) {
    if (x.size() != flat_size(problem))
        throw shape_error("decode_decision: flat vector has wrong length");
    out.controls.resize(static_cast<std::size_t>(problem.n_segments));
    for (std::size_t i = 0; i < out.controls.size(); ++i)
        out.controls[i] = {x[3 * i + 0], x[3 * i + 1], x[3 * i + 2]};
    out.m_f = x.back() * problem.m0;
}

inline DecisionVector decode_decision(const SFProblem& problem, const std::vector<double>& x) {
    DecisionVector d;
    decode_decision_into(problem, x, d);
    return d;
}

// Box bounds for the flat vector: controls componentwise in [-1,1], normalized
// arrival mass in [m_dry/m0, 1].
inline std::pair<std::vector<double>, std::vector<double>> decision_bounds(
    const SFProblem& problem) {
    const std::size_t m = flat_size(problem);
    std::vector<double> lo(m, -1.0), hi(m, 1.0);
    lo.back() = problem.m_dry / problem.m0;
    hi.back() = 1.0;
    return {std::move(lo), std::move(hi)};
}

// Per-segment trajectory dump for inspection: rows in ascending epoch, states
// sampled just after each impulse (backward-leg rows carry the backward-leg
// mass bookkeeping). Positions in AU, velocities km/s, mass kg, impulse m/s.
inline void write_trajectory_csv(const SFProblem& problem, const DecisionVector& decision,
                                 double epoch_mjd, std::ostream& os) {
    const double dt = problem.seg_dt_tu();
    const double half = 0.5 * dt;
    const double seg_days = problem.tof_days / problem.n_segments;
    const int n_fwd = problem.forward_segments();

    struct Row {
        double mjd;
        astro::StateVector s;
        double dv_mps;
    };
    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(problem.n_segments) + 2);

    astro::StateVector s = problem.departure_state;
    s.mass = problem.m0;
    rows.push_back({epoch_mjd, s, 0.0});
    for (int i = 0; i < n_fwd; ++i) {
        s = astro::kepler_propagate(s, half);
        const double m_pre = s.mass;
        const Vec3& u = decision.controls[static_cast<std::size_t>(i)];
        s = apply_impulse(s, u, dt, problem, Direction::forward);
        rows.push_back({epoch_mjd + (i + 0.5) * seg_days, s,
                        problem.t_max_n * u.norm() * problem.seg_dt_s() / m_pre});
        s = astro::kepler_propagate(s, half);
    }

    std::vector<Row> back;
    s.position = problem.arrival_position;
    s.velocity = problem.arrival_velocity;
    s.mass = decision.m_f;
    back.push_back({epoch_mjd + problem.tof_days, s, 0.0});
    for (int i = problem.n_segments - 1; i >= n_fwd; --i) {
        s = astro::kepler_propagate(s, -half);
        const Vec3& u = decision.controls[static_cast<std::size_t>(i)];
        const double m_carried = s.mass;
        s = apply_impulse(s, u, dt, problem, Direction::backward);
        back.push_back({epoch_mjd + (i + 0.5) * seg_days, s,
                        problem.t_max_n * u.norm() * problem.seg_dt_s() / m_carried});
        s = astro::kepler_propagate(s, -half);
    }

    os << "epoch_mjd,x_au,y_au,z_au,vx_kms,vy_kms,vz_kms,mass_kg,dv_mps\n";
    os.precision(17);
    auto emit = [&](const Row& r) {
        os << r.mjd << ',' << r.s.position.x << ',' << r.s.position.y << ','
           << r.s.position.z << ',' << vu_to_kms(r.s.velocity.x) << ','
           << vu_to_kms(r.s.velocity.y) << ','
           << vu_to_kms(r.s.velocity.z) << ',' << r.s.mass << ',' << r.dv_mps
           << '\n';
    };
    for (const auto& r : rows) emit(r);
    for (auto it = back.rbegin(); it != back.rend(); ++it) emit(*it);
}

}  // namespace ltfeas::sft
