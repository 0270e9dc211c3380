#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wakeloc/clock.hpp"
#include "wakeloc/error.hpp"

using namespace wakeloc;

TEST(Clock, ToLocalExamples) {
    EXPECT_EQ(to_local(TimeInstant::from_seconds(10.0), ClockModel{}).count(), 10 * kPicosPerSecond);

    ClockModel fast;
    fast.skew = 1e-5;
    EXPECT_EQ(to_local(TimeInstant::from_seconds(1.0), fast).count(), 1'000'010'000'000);

    ClockModel offset;
    offset.offset = TimeDuration::nanos(3);
    EXPECT_EQ(to_local(TimeInstant(0), offset).count(), 3'000);
}

TEST(Clock, RoundTripWithinOnePicosecond) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const ClockModel c = sample_clock(rng, 50.0, TimeDuration::millis(1), 1e-9);
        const TimeInstant t(static_cast<std::int64_t>(rng() % (1000 * kPicosPerSecond)));
        EXPECT_LE(std::llabs((from_local(to_local(t, c), c) - t).count()), 1);
        const Timestamp exact = Timestamp::from_parts(t.count(), 0.3);
        EXPECT_NEAR(picos_between(from_local(to_local(exact, c), c), exact), 0.0, 1e-3);
    }
}

TEST(Clock, StrictlyMonotonic) {
    ClockModel c;
    c.skew = -40e-6;
    c.drift_rate = 1e-9;
    TimeInstant prev = to_local(TimeInstant(0), c);
    for (std::int64_t k = 1; k < 1000; ++k) {
        const TimeInstant cur = to_local(TimeInstant(k * 1'000'003), c);
        EXPECT_GT(cur, prev);
        prev = cur;
    }
}

TEST(Clock, ValidateBounds) {
    ClockModel c;
    c.skew = 60e-6;
    EXPECT_THROW(c.validate(50e-6), Error);
    c.skew = 20e-6;
    EXPECT_NO_THROW(c.validate(50e-6));
    c.drift_rate = -1e-3;
    EXPECT_THROW(c.validate(50e-6, 1e6), Error);
}

TEST(Clock, CfoExamples) {
    ClockModel a, b;
    a.skew = b.skew = 7e-6;
    EXPECT_EQ(cfo_ratio(a, b), 1.0);
    a.skew = 1e-5;
    b.skew = 0.0;
    EXPECT_DOUBLE_EQ(cfo_ratio(a, b), 1.00001);
    a.skew = 0.0;
    b.skew = 2e-5;
    EXPECT_DOUBLE_EQ(cfo_ratio(a, b), 1.0 / 1.00002);
}

TEST(Clock, CfoNoiseIsZeroMean) {
    ClockModel a, b;
    std::mt19937_64 rng(1);
    double sum = 0.0;
    for (int i = 0; i < 4000; ++i) sum += cfo_ratio(a, b, 1e-7, rng) - 1.0;
    EXPECT_NEAR(sum / 4000, 0.0, 1e-8);
}

TEST(Clock, LocalWaitTakesLongerOnSlowClock) {
    ClockModel slow;
    slow.skew = -1e-5;
    const double g = global_seconds_for_local_wait(Timestamp{}, 1e-3, slow);
    EXPECT_NEAR(g, 1e-3 / (1.0 - 1e-5), 1e-15);
}

TEST(Clock, SampleClockWithinBounds) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const ClockModel c = sample_clock(rng, 20.0, TimeDuration::millis(1));
        EXPECT_LE(std::fabs(c.skew), 20e-6);
        EXPECT_GE(c.offset.count(), 0);
        EXPECT_LE(c.offset, TimeDuration::millis(1));
    }
}
