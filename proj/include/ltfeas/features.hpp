#pragma once
// Feature construction for transfer-feasibility learning: a fixed 103-wide
// descriptor of each transfer scenario (scenario scalars plus both bodies'
// departure-epoch states in five orbital representations and three scalar
// orbit quantities), per-feature affine standardization, and
// importance-ranked column selection. The feature name list is a frozen
// format contract: CSV columns and persisted scalers refer to it by name.

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltfeas/astro/catalog.hpp"
#include "ltfeas/astro/elements.hpp"
#include "ltfeas/datagen.hpp"
#include "ltfeas/errors.hpp"

namespace ltfeas::features {

inline constexpr std::size_t kNumFeatures = 103;

// Frozen column order: 4 scenario scalars, then five 18-wide representation
// groups (body 1, body 2, delta = body1 - body2), then three scalar triples.
// Angular deltas are wrapped to (-pi, pi].
inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        n.reserve(kNumFeatures);
        n.insert(n.end(), {"m_i", "tof", "tof_ini", "lam_dv"});
        const struct {
            const char* group;
            std::array<const char*, 6> comps;
        } groups[] = {
            {"coe", {"a", "e", "i", "raan", "argp", "nu"}},
            {"mee", {"p", "f", "g", "h", "k", "L"}},
            {"pv", {"x", "y", "z", "vx", "vy", "vz"}},
            {"sph", {"r", "az", "el", "vr", "vaz", "vel"}},
            {"cyl", {"rho", "theta", "z", "vrho", "vtheta", "vz"}},
        };
        for (const auto& g : groups)
            for (const char* tag : {"1", "2", "d"})
                for (const char* c : g.comps)
                    n.push_back(std::string(g.group) + tag + "_" + c);
        for (const char* s : {"r", "en", "h"})
            for (const char* tag : {"1", "2", "d"}) n.push_back(std::string(s) + tag);
        return n;
    }();
    return names;
}

// Indices whose body1/body2 difference is an angle (wrapped on output).
inline const std::vector<bool>& angular_delta_mask() {
    static const std::vector<bool> mask = [] {
        std::vector<bool> m(kNumFeatures, false);
        const auto& names = feature_names();
        for (std::size_t j = 0; j < kNumFeatures; ++j) {
            const std::string& s = names[j];
            m[j] = s == "coed_i" || s == "coed_raan" || s == "coed_argp" ||
                   s == "coed_nu" || s == "meed_L" || s == "sphd_az" ||
                   s == "sphd_el" || s == "cyld_theta";
        }
        return m;
    }();
    return mask;
}

struct FeatureRecord {
    std::int64_t id = 0;
    std::vector<double> values;  // length kNumFeatures, frozen order
    bool feasible = false;
};

namespace detail {

inline void push_state_groups(const astro::StateVector& s, std::vector<double>& coe6,
                              std::vector<double>& mee6, std::vector<double>& pv6,
                              std::vector<double>& sph6, std::vector<double>& cyl6) {
    const auto coe = astro::state_to_elements(s);
    coe6 = {coe.a, coe.e, coe.i, coe.raan, coe.argp, coe.nu};
    const auto fr = astro::state_to_frames(s);
    mee6 = {fr.mee.p_sl, fr.mee.f, fr.mee.g, fr.mee.h, fr.mee.k, fr.mee.L};
    pv6 = {s.position.x, s.position.y, s.position.z,
           s.velocity.x, s.velocity.y, s.velocity.z};
    sph6 = {fr.spherical.r,   fr.spherical.azimuth, fr.spherical.elevation,
            fr.spherical.v_r, fr.spherical.v_az,    fr.spherical.v_el};
    cyl6 = {fr.cylindrical.rho,   fr.cylindrical.theta,   fr.cylindrical.z,
            fr.cylindrical.v_rho, fr.cylindrical.v_theta, fr.cylindrical.v_z};
}

}  // namespace detail

// Both bodies are evaluated at the departure epoch; body 2's future
// (arrival-time) geometry enters through tof and the Lambert cost.
inline FeatureRecord build_features(const datagen::LabeledTransfer& rec,
                                    const astro::Catalog& catalog) {
    const auto& b1 = astro::find_body(catalog, rec.scenario.body1_id);
    const auto& b2 = astro::find_body(catalog, rec.scenario.body2_id);
    const auto s1 = astro::ephemeris_at(b1, rec.scenario.epoch_mjd);
    const auto s2 = astro::ephemeris_at(b2, rec.scenario.epoch_mjd);

    FeatureRecord out;
    out.id = rec.id;
    out.feasible = rec.feasible;
    out.values.reserve(kNumFeatures);
    out.values = {rec.scenario.m0, rec.scenario.tof_days, rec.scenario.tof_ini_days,
                  rec.scenario.lambert_dv_kms};

    std::vector<double> g1[5], g2[5];
    detail::push_state_groups(s1, g1[0], g1[1], g1[2], g1[3], g1[4]);
    detail::push_state_groups(s2, g2[0], g2[1], g2[2], g2[3], g2[4]);
    // Within each group the delta row wraps its angular components; the
    // group-local angular positions mirror angular_delta_mask().
    static const bool ang[5][6] = {
        {false, false, true, true, true, true},    // coe: i, raan, argp, nu
        {false, false, false, false, false, true}, // mee: L
        {false, false, false, false, false, false},
        {false, true, true, false, false, false},  // sph: az, el
        {false, true, false, false, false, false}, // cyl: theta
    };
    for (int g = 0; g < 5; ++g) {
        for (double v : g1[g]) out.values.push_back(v);
        for (double v : g2[g]) out.values.push_back(v);
        for (std::size_t c = 0; c < 6; ++c) {
            const double d = g1[g][c] - g2[g][c];
            out.values.push_back(ang[g][c] ? astro::wrap_pi(d) : d);
        }
    }

    const auto o1 = astro::orbit_scalars(s1);
    const auto o2 = astro::orbit_scalars(s2);
    out.values.insert(out.values.end(),
                      {o1.r_sun, o2.r_sun, o1.r_sun - o2.r_sun,
                       o1.energy, o2.energy, o1.energy - o2.energy,
                       o1.h_mag, o2.h_mag, o1.h_mag - o2.h_mag});

    for (double v : out.values)
        if (!std::isfinite(v))
            throw numerical_error("build_features: non-finite feature value", v);
    if (out.values.size() != kNumFeatures)
        throw shape_error("build_features: internal layout mismatch");
    return out;
}

// ---------------------------------------------------------------------------
// Standardization: x' = (x - mu_x)/sigma_x * sigma_y + mu_y per column, with
// the n-1 sample convention for sigma_x; zero-variance columns map to the
// constant mu_y.

using Matrix = std::vector<std::vector<double>>;  // row = record

struct Scaler {
    std::vector<std::string> names;  // column names, for the persisted form
    std::vector<double> mu_x;
    std::vector<double> sigma_x;
    double mu_y = 0.0;
    double sigma_y = 1.0;
};

inline void check_rect(const Matrix& x, std::size_t width, const char* who) {
    for (const auto& row : x)
        if (row.size() != width) throw shape_error(std::string(who) + ": ragged matrix");
}

inline Scaler fit_scaler(const Matrix& x, double mu_y = 0.0, double sigma_y = 1.0,
                         std::vector<std::string> names = {}) {
    if (x.empty()) throw input_error("fit_scaler: empty matrix");
    const std::size_t w = x.front().size();
    check_rect(x, w, "fit_scaler");
    if (!names.empty() && names.size() != w)
        throw shape_error("fit_scaler: name list width mismatch");

    Scaler s;
    s.names = std::move(names);
    s.mu_x.assign(w, 0.0);
    s.sigma_x.assign(w, 0.0);
    s.mu_y = mu_y;
    s.sigma_y = sigma_y;
    const double n = static_cast<double>(x.size());
    for (const auto& row : x)
        for (std::size_t j = 0; j < w; ++j) s.mu_x[j] += row[j];
    for (std::size_t j = 0; j < w; ++j) s.mu_x[j] /= n;
    if (x.size() > 1) {
        for (const auto& row : x)
            for (std::size_t j = 0; j < w; ++j) {
                const double d = row[j] - s.mu_x[j];
                s.sigma_x[j] += d * d;
            }
        for (std::size_t j = 0; j < w; ++j)
            s.sigma_x[j] = std::sqrt(s.sigma_x[j] / (n - 1.0));
    }
    return s;
}

inline Matrix apply_scaler(const Scaler& s, const Matrix& x) {
    const std::size_t w = s.mu_x.size();
    check_rect(x, w, "apply_scaler");
    Matrix out = x;
    for (auto& row : out)
        for (std::size_t j = 0; j < w; ++j)
            row[j] = s.sigma_x[j] > 0.0
                         ? (row[j] - s.mu_x[j]) / s.sigma_x[j] * s.sigma_y + s.mu_y
                         : s.mu_y;
    return out;
}

inline nlohmann::ordered_json scaler_to_json(const Scaler& s) {
    nlohmann::ordered_json j;
    j["names"] = s.names;
    j["mu_x"] = s.mu_x;
    j["sigma_x"] = s.sigma_x;
    j["mu_y"] = s.mu_y;
    j["sigma_y"] = s.sigma_y;
    return j;
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler s;
    s.names = j.at("names").get<std::vector<std::string>>();
    s.mu_x = j.at("mu_x").get<std::vector<double>>();
    s.sigma_x = j.at("sigma_x").get<std::vector<double>>();
    s.mu_y = j.at("mu_y").get<double>();
    s.sigma_y = j.at("sigma_y").get<double>();
    if (s.mu_x.size() != s.sigma_x.size() ||
        (!s.names.empty() && s.names.size() != s.mu_x.size()))
        throw io_error("scaler_from_json: inconsistent field widths");
    return s;
}

inline void save_scaler(const Scaler& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_scaler: cannot open " + path);
    out << scaler_to_json(s).dump(2) << "\n";
}

inline Scaler load_scaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_scaler: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("load_scaler: parse failure: ") + e.what());
    }
    return scaler_from_json(j);
}

// ---------------------------------------------------------------------------
// Importance-ranked column selection: keep the first k columns of `ranking`
// (a permutation of `col_names`), in ranking order.

struct Selection {
    Matrix x;
    std::vector<std::string> names;
};

inline Selection select_top_k(const Matrix& x, const std::vector<std::string>& col_names,
                              const std::vector<std::string>& ranking, std::size_t k) {
    if (k == 0 || k > ranking.size())
        throw input_error("select_top_k: k outside [1, ranking size]");
    if (ranking.size() != col_names.size())
        throw input_error("select_top_k: ranking is not a permutation of the columns");
    check_rect(x, col_names.size(), "select_top_k");

    std::vector<std::size_t> cols;
    cols.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
        std::size_t found = col_names.size();
        for (std::size_t j = 0; j < col_names.size(); ++j)
            if (col_names[j] == ranking[r]) {
                found = j;
                break;
            }
        if (found == col_names.size())
            throw input_error("select_top_k: ranked name not a column: " + ranking[r]);
        cols.push_back(found);
    }

    Selection out;
    out.names.reserve(k);
    for (std::size_t c : cols) out.names.push_back(col_names[c]);
    out.x.reserve(x.size());
    for (const auto& row : x) {
        std::vector<double> r;
        r.reserve(k);
        for (std::size_t c : cols) r.push_back(row[c]);
        out.x.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV persistence: header names every feature column plus `label`; rows carry
// full-precision values and the label as feasible|infeasible.

inline void write_feature_csv(const std::vector<FeatureRecord>& records,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_feature_csv: cannot open " + path);
    const auto& names = feature_names();
    for (const auto& n : names) out << n << ',';
    out << "label\n";
    char buf[32];
    for (const auto& r : records) {
        if (r.values.size() != kNumFeatures)
            throw shape_error("write_feature_csv: record width != 103");
        for (double v : r.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << (r.feasible ? "feasible" : "infeasible") << '\n';
    }
    if (!out) throw io_error("write_feature_csv: write failure on " + path);
}

struct FeatureTable {
    Matrix x;
    std::vector<int> labels;  // 1 = feasible, 0 = infeasible
    std::vector<std::string> names;
};

inline FeatureTable read_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_feature_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("read_feature_csv: empty file " + path);

    FeatureTable t;
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.names.push_back(cell);
    if (t.names.empty() || t.names.back() != "label")
        throw io_error("read_feature_csv: header must end with label");
    t.names.pop_back();

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        row.reserve(t.names.size());
        for (std::size_t j = 0; j < t.names.size(); ++j) {
            if (!std::getline(ls, cell, ','))
                throw io_error("read_feature_csv: short row at line " +
                               std::to_string(line_no));
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw io_error("read_feature_csv: bad number at line " +
                               std::to_string(line_no));
            }
        }
        if (!std::getline(ls, cell))
            throw io_error("read_feature_csv: missing label at line " +
                           std::to_string(line_no));
        if (cell != "feasible" && cell != "infeasible")
            throw io_error("read_feature_csv: bad label at line " +
                           std::to_string(line_no));
        t.labels.push_back(cell == "feasible" ? 1 : 0);
        t.x.push_back(std::move(row));
    }
    return t;
}

}  // namespace ltfeas::features
