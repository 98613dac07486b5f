// Keplerian body catalog: CSV persistence, a synthetic main-belt-like
// generator, and two-body ephemeris evaluation.
//
// Catalog CSV schema (angles in degrees on disk, radians in memory):
//   id,name,epoch_mjd,a_au,e,i_deg,raan_deg,argp_deg,M0_deg
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ltfeas/astro/elements.hpp"
#include "ltfeas/constants.hpp"
#include "ltfeas/errors.hpp"
#include "ltfeas/rng.hpp"

namespace ltfeas::astro {

inline constexpr double kDegToRad = kPi / 180.0;

// Elliptic catalog entry. `elements.nu` holds the mean anomaly M0 at
// `epoch_mjd`, not a true anomaly.
struct BodyRecord {
    int id = 0;
    std::string name;
    double epoch_mjd = 0.0;
    ClassicalElements elements;

    void validate() const {
        if (!(elements.e >= 0.0 && elements.e < 1.0))
            throw input_error("BodyRecord: eccentricity outside [0, 1)");
        if (!(elements.a > 0.0))
            throw input_error("BodyRecord: non-positive semi-major axis");
    }
};

using Catalog = std::vector<BodyRecord>;

inline const BodyRecord& find_body(const Catalog& catalog, int id) {
    for (const auto& b : catalog)
        if (b.id == id) return b;
    throw catalog_miss_error("catalog: no body with id " + std::to_string(id));
}

// Mean anomaly -> eccentric anomaly, Newton on M = E - e sin E.
inline double solve_kepler_equation(double mean_anomaly, double e,
                                    int max_iters = 50) {
    const double m = wrap_2pi(mean_anomaly);
    double big_e = e < 0.8 ? m : kPi;
    double delta = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        const double f = big_e - e * std::sin(big_e) - m;
        delta = f / (1.0 - e * std::cos(big_e));
        big_e -= delta;
        if (std::abs(delta) < 1e-13) return big_e;
    }
    throw numerical_error("solve_kepler_equation: Newton stalled", std::abs(delta));
}

// Two-body state of a catalog body at an epoch (canonical units, mass 1 kg).
inline StateVector ephemeris_at(const BodyRecord& body, double epoch_mjd) {
    if (!std::isfinite(epoch_mjd))
        throw input_error("ephemeris_at: non-finite epoch");
    const double n = 1.0 / std::sqrt(body.elements.a * body.elements.a * body.elements.a);
    const double dt_tu = days_to_tu(epoch_mjd - body.epoch_mjd);
    const double m = body.elements.nu + n * dt_tu;  // nu slot stores M0
    const double big_e = solve_kepler_equation(m, body.elements.e);
    const double e = body.elements.e;
    const double nu = 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(big_e / 2.0),
                                       std::sqrt(1.0 - e) * std::cos(big_e / 2.0));
    ClassicalElements coe = body.elements;
    coe.nu = wrap_2pi(nu);
    return elements_to_state(coe);
}

inline Catalog synth_catalog(int n, std::uint64_t seed) {
    Catalog out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
        BodyRecord b;
        b.id = i + 1;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "SYN-%04d", b.id);
        b.name = buf;
        b.epoch_mjd = 59000.0;
        b.elements.a = uniform(rng, 2.0, 3.5);
        b.elements.e = uniform(rng, 0.0, 0.3);
        b.elements.i = uniform(rng, 0.0, 20.0 * kDegToRad);
        b.elements.raan = uniform(rng, 0.0, kTwoPi);
        b.elements.argp = uniform(rng, 0.0, kTwoPi);
        b.elements.nu = uniform(rng, 0.0, kTwoPi);  // M0
        out.push_back(std::move(b));
    }
    return out;
}

inline const char* kCatalogHeader = "id,name,epoch_mjd,a_au,e,i_deg,raan_deg,argp_deg,M0_deg";

inline void save_catalog(const Catalog& catalog, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("save_catalog: cannot open " + path);
    out << kCatalogHeader << "\n";
    char line[512];
    for (const auto& b : catalog) {
        std::snprintf(line, sizeof(line),
                      "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      b.id, b.name.c_str(), b.epoch_mjd, b.elements.a, b.elements.e,
                      b.elements.i / kDegToRad, b.elements.raan / kDegToRad,
                      b.elements.argp / kDegToRad, b.elements.nu / kDegToRad);
        out << line;
    }
}

inline Catalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_catalog: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,name,epoch_mjd", 0) != 0)
        throw io_error("load_catalog: bad header in " + path);

    Catalog out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw io_error("load_catalog: expected 9 fields, got " +
                           std::to_string(fields.size()));
        BodyRecord b;
        b.id = std::stoi(fields[0]);
        b.name = fields[1];
        b.epoch_mjd = std::stod(fields[2]);
        b.elements.a = std::stod(fields[3]);
        b.elements.e = std::stod(fields[4]);
        b.elements.i = std::stod(fields[5]) * kDegToRad;
        b.elements.raan = wrap_2pi(std::stod(fields[6]) * kDegToRad);
        b.elements.argp = wrap_2pi(std::stod(fields[7]) * kDegToRad);
        b.elements.nu = wrap_2pi(std::stod(fields[8]) * kDegToRad);
        b.validate();
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace ltfeas::astro
