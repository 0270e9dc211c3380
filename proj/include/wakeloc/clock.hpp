#pragma once

#include <random>

#include "wakeloc/core.hpp"

namespace wakeloc {

// Crystal model of one node: local = offset + (1 + skew) * t + drift * t^2 / 2
// with t the global time since scenario start. A positive skew means the
// local counter runs fast.
struct ClockModel {
    double skew = 0.0;          // fraction, 10 ppm = 1e-5
    TimeDuration offset{};      // local reading at global t = 0
    double drift_rate = 0.0;    // d(skew)/dt in 1/s

    // Throws InvalidArgument if |skew| exceeds the bound or drift would make
    // the clock non-monotonic within `horizon_s`.
    void validate(double max_abs_skew = 50e-6, double horizon_s = 1e6) const;

    friend bool operator==(const ClockModel&, const ClockModel&) = default;
};

// Rounded to the nearest picosecond. from_local(to_local(t)) == t +- 1 ps.
TimeInstant to_local(TimeInstant t_global, const ClockModel& clock);
TimeInstant from_local(TimeInstant t_local, const ClockModel& clock);

// Sub-picosecond exact versions used on the measurement path.
Timestamp to_local(const Timestamp& t_global, const ClockModel& clock);
Timestamp from_local(const Timestamp& t_local, const ClockModel& clock);

// Global duration occupied by a wait of `local_wait` counted on `clock`,
// starting at local time `from_local_time`.
double global_seconds_for_local_wait(const Timestamp& from_local_time, double local_wait_s, const ClockModel& clock);

// Transmitter clock rate relative to the receiver clock, (1+skew_tx)/(1+skew_rx),
// as reported by the receiving PHY. Drift is evaluated at `t_global_s`.
double cfo_ratio(const ClockModel& clock_tx, const ClockModel& clock_rx, double t_global_s = 0.0);

// Same, perturbed by zero-mean Gaussian estimation noise.
double cfo_ratio(const ClockModel& clock_tx, const ClockModel& clock_rx, double noise_sigma, std::mt19937_64& rng,
                 double t_global_s = 0.0);

// Skew uniform in [-max_ppm, +max_ppm], offset uniform in [0, max_offset].
ClockModel sample_clock(std::mt19937_64& rng, double max_skew_ppm, TimeDuration max_offset, double drift_rate = 0.0);

}  // namespace wakeloc
