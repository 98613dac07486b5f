// Error taxonomy shared across the library.
//
// CLI exit-code mapping: usage_error -> 1, io/data errors -> 2,
// numerical failures -> 3.
#pragma once

#include <stdexcept>
#include <string>

namespace ltfeas {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument / precondition violation on an API call.
struct input_error : error {
    using error::error;
};

// Malformed files, unwritable paths, missing catalog entries.
struct io_error : error {
    using error::error;
};

struct catalog_miss_error : io_error {
    using io_error::io_error;
};

struct shape_error : input_error {
    using input_error::input_error;
};

// Iterative kernel failed to converge; carries the final residual.
struct numerical_error : error {
    double residual;
    explicit numerical_error(const std::string& what, double residual_ = 0.0)
        : error(what), residual(residual_) {}
};

// Lambert geometry with transfer angle ~0 or ~pi.
struct degenerate_geometry_error : error {
    using error::error;
};

// Parabolic orbit handed to a conversion that cannot represent it.
struct unsupported_orbit_error : error {
    using error::error;
};

// Forward SFT leg drove the mass below the dry mass; the solver treats this
// as a constraint violation, not a crash.
struct infeasible_mass_error : error {
    using error::error;
};

// Scenario sampling exceeded its resampling budget.
struct sampling_error : error {
    using error::error;
};

struct experiment_error : error {
    using error::error;
};

}  // namespace ltfeas
