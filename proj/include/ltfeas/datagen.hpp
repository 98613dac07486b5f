#pragma once

// Dataset generation: random transfer scenarios between catalog bodies, a
// Lambert grid search supplying the time-of-flight guess and impulsive dv
// reference, labeling through the trajectory solver (converged => feasible),
// and line-delimited JSON persistence.
//
// Determinism contract: each record's sampling RNG is seeded by
// mix(seed, record_index), and records are written in index order, so the
// output file is byte-identical for any worker count.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltfeas/astro/catalog.hpp"
#include "ltfeas/astro/lambert.hpp"
#include "ltfeas/constants.hpp"
#include "ltfeas/errors.hpp"
#include "ltfeas/nlp.hpp"
#include "ltfeas/rng.hpp"
#include "ltfeas/sft.hpp"

namespace ltfeas::datagen {

using json = nlohmann::ordered_json;

// Sampling envelope (mission start window 2020-01-01 .. 2060-01-01, wet mass
// and time-of-flight ranges) and the spacecraft constants used for labeling.
inline constexpr double kEpochMinMjd = 58849.0;
inline constexpr double kEpochMaxMjd = 73459.0;
inline constexpr double kM0MinKg = 1000.0;
inline constexpr double kM0MaxKg = 3000.0;
inline constexpr double kTofIniMinDays = 60.0;
inline constexpr double kTofIniMaxDays = 1460.0;
inline constexpr double kMDryKg = 1000.0;
inline constexpr double kIspS = 4190.0;
inline constexpr double kTMaxN = 0.236;
inline constexpr int kNSegments = 20;

// Spacecraft/transcription constants used when labeling scenarios. Defaults
// reproduce the fixed dataset envelope above; overriding them changes label
// semantics, so persisted datasets should record any non-default values.
struct PhysicalConstants {
    double isp_s = kIspS;
    double t_max_n = kTMaxN;
    double m_dry_kg = kMDryKg;
    int n_segments = kNSegments;

    void validate() const {
        if (!(isp_s > 0.0)) throw input_error("PhysicalConstants: isp must be > 0");
        if (!(t_max_n > 0.0))
            throw input_error("PhysicalConstants: max thrust must be > 0");
        if (!(m_dry_kg > 0.0))
            throw input_error("PhysicalConstants: dry mass must be > 0");
        if (n_segments < 1)
            throw input_error("PhysicalConstants: need at least one segment");
    }
};

struct TransferScenario {
    int body1_id = 0;
    int body2_id = 0;
    double epoch_mjd = 0.0;
    double m0 = 0.0;             // kg
    double tof_days = 0.0;       // low-thrust transfer time
    double tof_ini_days = 0.0;   // best impulsive (Lambert) transfer time
    double lambert_dv_kms = 0.0; // total dv of that impulsive transfer

    void validate() const {
        if (body1_id == body2_id)
            throw input_error("TransferScenario: identical bodies");
        if (!(epoch_mjd >= kEpochMinMjd && epoch_mjd <= kEpochMaxMjd))
            throw input_error("TransferScenario: epoch outside mission window");
        if (!(m0 >= kM0MinKg && m0 <= kM0MaxKg))
            throw input_error("TransferScenario: wet mass outside [1000, 3000] kg");
        if (!(tof_ini_days >= kTofIniMinDays && tof_ini_days <= kTofIniMaxDays))
            throw input_error("TransferScenario: tof_ini outside [60, 1460] d");
        const double lo = 1.2 * tof_ini_days;
        const double hi = std::min(2.0 * tof_ini_days, kTofIniMaxDays);
        if (!(tof_days >= lo && tof_days <= hi))
            throw input_error("TransferScenario: tof outside its sampling window");
        if (!(std::isfinite(lambert_dv_kms) && lambert_dv_kms >= 0.0))
            throw input_error("TransferScenario: bad lambert dv");
    }
};

struct LabeledTransfer {
    std::int64_t id = 0;
    TransferScenario scenario;
    bool feasible = false;
    // NaN when infeasible; serialized as null.
    double final_mass_kg = std::numeric_limits<double>::quiet_NaN();
    double defect_norm = 0.0;
    int solve_iters = 0;
    std::uint64_t seed = 0;
};

struct GridSearchResult {
    double tof_ini_days = 0.0;
    double lambert_dv_kms = 0.0;
};

// Minimum-dv rendezvous over the zero-revolution Lambert transfers on a tof
// grid spanning [60, 1460] days. Degenerate or non-converging grid points
// are skipped; if none survives, throws (caller resamples the scenario).
inline GridSearchResult lambert_grid_search(const astro::BodyRecord& body1,
                                            const astro::BodyRecord& body2,
                                            double epoch_mjd,
                                            double grid_step_days = 10.0) {
    if (!(grid_step_days > 0.0))
        throw input_error("lambert_grid_search: grid step must be positive");
    const astro::StateVector s1 = astro::ephemeris_at(body1, epoch_mjd);

    GridSearchResult best;
    best.lambert_dv_kms = std::numeric_limits<double>::infinity();
    for (double tof = kTofIniMinDays; tof <= kTofIniMaxDays + 1e-9;
         tof += grid_step_days) {
        const astro::StateVector s2 = astro::ephemeris_at(body2, epoch_mjd + tof);
        astro::LambertSolution sol;
        try {
            sol = astro::lambert_solve(s1.position, s2.position, days_to_tu(tof));
        } catch (const degenerate_geometry_error&) {
            continue;
        } catch (const numerical_error&) {
            continue;
        }
        const double dv_vu =
            (sol.v1 - s1.velocity).norm() + (s2.velocity - sol.v2).norm();
        const double dv_kms = vu_to_kms(dv_vu);
        if (dv_kms < best.lambert_dv_kms) {
            best.lambert_dv_kms = dv_kms;
            best.tof_ini_days = tof;
        }
    }
    if (!std::isfinite(best.lambert_dv_kms))
        throw numerical_error("lambert_grid_search: no usable grid point");
    return best;
}

// One random scenario: epoch and distinct body pair uniform over the
// catalog, wet mass uniform in its range, tof uniform in the window implied
// by the grid-searched impulsive tof. Scenarios whose window is empty
// (tof_ini > 1460/1.2 days) are discarded and redrawn.
inline TransferScenario sample_scenario(const astro::Catalog& catalog, Rng& rng,
                                        int max_attempts = 1000) {
    if (catalog.size() < 2)
        throw input_error("sample_scenario: need at least two catalog bodies");
    const auto n = static_cast<std::int64_t>(catalog.size());

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        TransferScenario s;
        s.epoch_mjd = uniform(rng, kEpochMinMjd, kEpochMaxMjd);
        const auto i1 = uniform_int(rng, 0, n - 1);
        auto i2 = uniform_int(rng, 0, n - 2);
        if (i2 >= i1) ++i2;
        const auto& b1 = catalog[static_cast<std::size_t>(i1)];
        const auto& b2 = catalog[static_cast<std::size_t>(i2)];
        s.body1_id = b1.id;
        s.body2_id = b2.id;
        s.m0 = uniform(rng, kM0MinKg, kM0MaxKg);

        GridSearchResult grid;
        try {
            grid = lambert_grid_search(b1, b2, s.epoch_mjd);
        } catch (const numerical_error&) {
            continue;  // pathological geometry on the whole grid
        }
        s.tof_ini_days = grid.tof_ini_days;
        s.lambert_dv_kms = grid.lambert_dv_kms;

        const double lo = 1.2 * s.tof_ini_days;
        const double hi = std::min(2.0 * s.tof_ini_days, kTofIniMaxDays);
        if (lo > hi) continue;  // empty transfer-time window
        s.tof_days = uniform(rng, lo, hi);
        s.validate();
        return s;
    }
    throw sampling_error("sample_scenario: exhausted resampling budget");
}

// Build the transcription problem for a scenario and label it by solver
// convergence. Deterministic given (scenario, catalog, solve options).
// Does not re-validate the scenario: sampling and persistence enforce the
// invariants, and hand-built out-of-envelope scenarios are useful in tests.
inline LabeledTransfer label_scenario(const TransferScenario& scenario,
                                      const astro::Catalog& catalog,
                                      const nlp::SolveOptions& opts = {},
                                      const PhysicalConstants& phys = {}) {
    phys.validate();
    const auto& b1 = astro::find_body(catalog, scenario.body1_id);
    const auto& b2 = astro::find_body(catalog, scenario.body2_id);

    sft::SFProblem problem;
    problem.departure_state = astro::ephemeris_at(b1, scenario.epoch_mjd);
    const astro::StateVector arrival =
        astro::ephemeris_at(b2, scenario.epoch_mjd + scenario.tof_days);
    problem.arrival_position = arrival.position;
    problem.arrival_velocity = arrival.velocity;
    problem.m0 = scenario.m0;
    problem.m_dry = phys.m_dry_kg;
    problem.tof_days = scenario.tof_days;
    problem.n_segments = phys.n_segments;
    problem.t_max_n = phys.t_max_n;
    problem.isp_s = phys.isp_s;

    const auto guess = nlp::lambert_informed_guess(problem, scenario.lambert_dv_kms);
    const auto res = nlp::solve(problem, guess, opts);

    LabeledTransfer out;
    out.scenario = scenario;
    out.feasible = res.converged;
    if (res.converged) out.final_mass_kg = res.final_mass;
    out.defect_norm = res.defect_norm;
    out.solve_iters = res.major_iters;
    return out;
}

inline json record_to_json(const LabeledTransfer& r) {
    json j;
    j["id"] = r.id;
    j["seed"] = r.seed;
    j["body1_id"] = r.scenario.body1_id;
    j["body2_id"] = r.scenario.body2_id;
    j["epoch_mjd"] = r.scenario.epoch_mjd;
    j["m0_kg"] = r.scenario.m0;
    j["tof_days"] = r.scenario.tof_days;
    j["tof_ini_days"] = r.scenario.tof_ini_days;
    j["lambert_dv_kms"] = r.scenario.lambert_dv_kms;
    j["label"] = r.feasible ? "feasible" : "infeasible";
    if (r.feasible)
        j["final_mass_kg"] = r.final_mass_kg;
    else
        j["final_mass_kg"] = nullptr;
    j["defect_norm"] = r.defect_norm;
    j["solve_iters"] = r.solve_iters;
    return j;
}

inline LabeledTransfer record_from_json(const json& j) {
    LabeledTransfer r;
    r.id = j.at("id").get<std::int64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scenario.body1_id = j.at("body1_id").get<int>();
    r.scenario.body2_id = j.at("body2_id").get<int>();
    r.scenario.epoch_mjd = j.at("epoch_mjd").get<double>();
    r.scenario.m0 = j.at("m0_kg").get<double>();
    r.scenario.tof_days = j.at("tof_days").get<double>();
    r.scenario.tof_ini_days = j.at("tof_ini_days").get<double>();
    r.scenario.lambert_dv_kms = j.at("lambert_dv_kms").get<double>();
    const std::string label = j.at("label").get<std::string>();
    if (label != "feasible" && label != "infeasible")
        throw io_error("dataset record: unknown label '" + label + "'");
    r.feasible = label == "feasible";
    if (j.at("final_mass_kg").is_null()) {
        if (r.feasible)
            throw io_error("dataset record: feasible label without final mass");
        r.final_mass_kg = std::numeric_limits<double>::quiet_NaN();
    } else {
        r.final_mass_kg = j.at("final_mass_kg").get<double>();
    }
    r.defect_norm = j.at("defect_norm").get<double>();
    r.solve_iters = j.at("solve_iters").get<int>();
    r.scenario.validate();
    return r;
}

struct DatasetSummary {
    std::int64_t n_total = 0;
    std::int64_t n_feasible = 0;
    std::int64_t n_infeasible = 0;
    // NaN when n_total = 0 (reported as null).
    double convergence_rate = std::numeric_limits<double>::quiet_NaN();
};

// Generate and persist n labeled records. Work is farmed to `workers`
// threads over record indices; per-record seeding plus index-ordered output
// makes the file independent of scheduling.
inline DatasetSummary generate_dataset(const astro::Catalog& catalog, std::int64_t n,
                                       int workers, std::uint64_t seed,
                                       const std::string& out_path,
                                       const nlp::SolveOptions& solve_opts = {},
                                       const datagen::PhysicalConstants& phys = {}) {
    if (n < 0) throw input_error("generate_dataset: negative record count");
    phys.validate();
    std::ofstream out(out_path);
    if (!out) throw io_error("generate_dataset: cannot open " + out_path);

    const auto count = static_cast<std::size_t>(n);
    std::vector<std::string> lines(count);
    std::vector<char> feasible_flags(count, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker_fn = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= count || failed.load()) return;
            try {
                Rng rng = make_rng(seed, idx);
                const TransferScenario scenario = sample_scenario(catalog, rng);
                LabeledTransfer rec = label_scenario(scenario, catalog, solve_opts, phys);
                rec.id = static_cast<std::int64_t>(idx);
                rec.seed = mix_seed(seed, idx);
                lines[idx] = record_to_json(rec).dump();
                feasible_flags[idx] = rec.feasible ? 1 : 0;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    const int nthreads = std::max(1, workers);
    if (nthreads == 1 || count <= 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker_fn);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    DatasetSummary summary;
    summary.n_total = n;
    for (std::size_t i = 0; i < count; ++i) {
        out << lines[i] << "\n";
        if (feasible_flags[i])
            ++summary.n_feasible;
        else
            ++summary.n_infeasible;
    }
    if (!out) throw io_error("generate_dataset: write failed on " + out_path);
    if (n > 0)
        summary.convergence_rate =
            static_cast<double>(summary.n_feasible) / static_cast<double>(n);
    return summary;
}

inline std::vector<LabeledTransfer> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_dataset: cannot open " + path);
    std::vector<LabeledTransfer> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw io_error("read_dataset: bad JSON at line " + std::to_string(lineno) +
                           ": " + e.what());
        }
        try {
            out.push_back(record_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw io_error("read_dataset: bad record at line " +
                           std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ltfeas::datagen
