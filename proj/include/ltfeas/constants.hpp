// Physical constants and canonical heliocentric units.
//
// Internally everything orbital runs in canonical units: lengths in AU and
// the time unit TU chosen so that the solar gravitational parameter is 1.
// File formats talk AU / days / km/s / kg; conversion happens at the
// boundary.
#pragma once

#include <cmath>

namespace ltfeas {

inline constexpr double kAuKm = 1.495978707e8;            // km per AU
inline constexpr double kMuSunKm3S2 = 1.32712440018e11;   // km^3/s^2
inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kG0 = 9.80665;                    // m/s^2

// TU = sqrt(AU^3 / mu_sun) in seconds (~58.13 days).
inline const double kTuSeconds =
    std::sqrt(kAuKm * kAuKm * kAuKm / kMuSunKm3S2);
inline const double kTuDays = kTuSeconds / kSecondsPerDay;

// Canonical velocity unit AU/TU in km/s (~29.78 km/s).
inline const double kVuKms = kAuKm / kTuSeconds;

inline double days_to_tu(double days) { return days / kTuDays; }
inline double tu_to_days(double tu) { return tu * kTuDays; }
inline double kms_to_vu(double kms) { return kms / kVuKms; }
inline double vu_to_kms(double vu) { return vu * kVuKms; }

}  // namespace ltfeas
