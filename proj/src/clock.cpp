#include "wakeloc/clock.hpp"

#include <cmath>

namespace wakeloc {

namespace {

constexpr double kPsPerS = static_cast<double>(kPicosPerSecond);

double rate_at(const ClockModel& c, double t_global_ps) {
    return 1.0 + c.skew + c.drift_rate * (t_global_ps / kPsPerS);
}

// to_local minus (offset + t), in picoseconds.
double local_excess_ps(const ClockModel& c, const Timestamp& t) {
    const double t_ps = static_cast<double>(t.ps) + t.frac_ps;
    const double t_s = t_ps / kPsPerS;
    return c.skew * static_cast<double>(t.ps) + c.skew * t.frac_ps + 0.5 * c.drift_rate * t_s * t_s * kPsPerS;
}

}  // namespace

void ClockModel::validate(double max_abs_skew, double horizon_s) const {
    if (!std::isfinite(skew) || std::fabs(skew) > max_abs_skew) {
        throw Error(Errc::InvalidArgument, "clock skew exceeds the configured bound");
    }
    if (!std::isfinite(drift_rate) || 1.0 + skew - std::fabs(drift_rate) * horizon_s <= 0.0) {
        throw Error(Errc::InvalidArgument, "clock drift makes the local clock non-monotonic");
    }
}

Timestamp to_local(const Timestamp& t_global, const ClockModel& clock) {
    Timestamp base = Timestamp::from_parts(t_global.ps + clock.offset.count(), t_global.frac_ps);
    return base.plus_ps(local_excess_ps(clock, t_global));
}

Timestamp from_local(const Timestamp& t_local, const ClockModel& clock) {
    // Initial guess ignores drift, then Newton steps on the exact forward map.
    const Timestamp since_offset = Timestamp::from_parts(t_local.ps - clock.offset.count(), t_local.frac_ps);
    const double since_offset_ps = static_cast<double>(since_offset.ps) + since_offset.frac_ps;
    Timestamp guess = since_offset.plus_ps(-clock.skew * since_offset_ps / (1.0 + clock.skew));
    for (int i = 0; i < 3; ++i) {
        const double err = picos_between(to_local(guess, clock), t_local);
        if (err == 0.0) break;
        const double t_ps = static_cast<double>(guess.ps) + guess.frac_ps;
        guess = guess.plus_ps(-err / rate_at(clock, t_ps));
    }
    return guess;
}

TimeInstant to_local(TimeInstant t_global, const ClockModel& clock) {
    const Timestamp t = to_local(Timestamp(t_global), clock);
    return TimeInstant(t.ps);
}

TimeInstant from_local(TimeInstant t_local, const ClockModel& clock) {
    const Timestamp t = from_local(Timestamp(t_local), clock);
    return TimeInstant(t.ps);
}

double global_seconds_for_local_wait(const Timestamp& from_local_time, double local_wait_s, const ClockModel& clock) {
    const Timestamp start = from_local(from_local_time, clock);
    const Timestamp end = from_local(from_local_time.plus_seconds(local_wait_s), clock);
    return seconds_between(end, start);
}

double cfo_ratio(const ClockModel& clock_tx, const ClockModel& clock_rx, double t_global_s) {
    const double t_ps = t_global_s * kPsPerS;
    return rate_at(clock_tx, t_ps) / rate_at(clock_rx, t_ps);
}

double cfo_ratio(const ClockModel& clock_tx, const ClockModel& clock_rx, double noise_sigma, std::mt19937_64& rng,
                 double t_global_s) {
    double ratio = cfo_ratio(clock_tx, clock_rx, t_global_s);
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        ratio += noise(rng);
    }
    return ratio;
}

ClockModel sample_clock(std::mt19937_64& rng, double max_skew_ppm, TimeDuration max_offset, double drift_rate) {
    ClockModel c;
    std::uniform_real_distribution<double> skew(-max_skew_ppm * 1e-6, max_skew_ppm * 1e-6);
    c.skew = max_skew_ppm > 0.0 ? skew(rng) : 0.0;
    if (max_offset.count() > 0) {
        std::uniform_int_distribution<std::int64_t> off(0, max_offset.count());
        c.offset = TimeDuration(off(rng));
    }
    c.drift_rate = drift_rate;
    return c;
}

}  // namespace wakeloc
