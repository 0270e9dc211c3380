#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "wakeloc/core.hpp"
#include "wakeloc/error.hpp"

using namespace wakeloc;

TEST(Distance, Examples) {
    EXPECT_DOUBLE_EQ(distance({0, 0, 0}, {0, 0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(distance({3, 4, 0}, {0, 0, 0}), 5.0);
    EXPECT_DOUBLE_EQ(distance({1, 2, 3}, {4, 6, 3}), 5.0);
}

TEST(Distance, SymmetricAndHorizontal) {
    const Position3 a{1.5, -2.0, 7.0}, b{-3.0, 4.0, 1.0};
    EXPECT_DOUBLE_EQ(distance(a, b), distance(b, a));
    EXPECT_DOUBLE_EQ(horizontal_distance(a, b), std::hypot(4.5, 6.0));
}

TEST(Position, CheckedRejectsNonFinite) {
    EXPECT_NO_THROW(Position3::checked(1, 2, 3));
    EXPECT_THROW(Position3::checked(std::nan(""), 0, 0), Error);
    EXPECT_THROW(Position3::checked(0, std::numeric_limits<double>::infinity(), 0), Error);
    try {
        Position3::checked(0, 0, std::nan(""));
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidArgument);
    }
}

TEST(Time, PicosecondResolutionAndRange) {
    EXPECT_EQ(TimeDuration::picos(1).count(), 1);
    EXPECT_EQ(TimeDuration::micros(720).count(), 720'000'000);
    const TimeDuration long_run = TimeDuration::seconds(2'000'000);
    EXPECT_EQ(long_run.count(), 2'000'000LL * kPicosPerSecond);
    EXPECT_DOUBLE_EQ(long_run.to_seconds(), 2e6);
    EXPECT_EQ(TimeDuration::from_seconds(1e-12).count(), 1);
    EXPECT_EQ(TimeDuration::from_seconds(0.4e-12).count(), 0);
    EXPECT_EQ(TimeDuration::from_seconds(-2.6e-12).count(), -3);
}

TEST(Time, InstantArithmetic) {
    const TimeInstant t0 = TimeInstant::from_seconds(1.0);
    const TimeInstant t1 = t0 + TimeDuration::millis(5);
    EXPECT_EQ((t1 - t0).count(), TimeDuration::millis(5).count());
    EXPECT_LT(t0, t1);
    EXPECT_DOUBLE_EQ(t1.to_seconds(), 1.005);
}

TEST(Timestamp, KeepsSubPicosecondRemainder) {
    const Timestamp a = Timestamp::from_parts(100, 0.25);
    const Timestamp b = a.plus_ps(0.5);
    EXPECT_EQ(b.ps, 101);
    EXPECT_NEAR(b.frac_ps, -0.25, 1e-12);
    EXPECT_NEAR(picos_between(b, a), 0.5, 1e-12);
    EXPECT_LT(a, b);
    const Timestamp c = Timestamp{}.plus_seconds(1e-9);
    EXPECT_EQ(c.ps, 1000);
    EXPECT_NEAR(seconds_between(c, Timestamp{}), 1e-9, 1e-21);
    EXPECT_GE(c.frac_ps, -0.5);
    EXPECT_LT(c.frac_ps, 0.5);
}

TEST(Timestamp, DurationAdditionPreservesRemainder) {
    const Timestamp a = Timestamp::from_parts(0, 0.3);
    const Timestamp b = a + TimeDuration::micros(1);
    EXPECT_EQ(b.ps, 1'000'000);
    EXPECT_NEAR(b.frac_ps, 0.3, 1e-12);
    EXPECT_EQ(b.rounded().count(), 1'000'000);
}

TEST(Messages, KindNames) {
    EXPECT_EQ(kind_name(msg::WakeUpCall{}), "wuc");
    EXPECT_EQ(kind_name(msg::Poll{}), "poll");
    EXPECT_TRUE(holds<msg::Response>(MessageKind{msg::Response{}}));
    EXPECT_FALSE(holds<msg::Poll>(MessageKind{msg::Response{}}));
}

TEST(Errors, CodeAndDetails) {
    const Error e(Errc::ValidationError, "bad config", {"a must be > 0", "b must be > 0"});
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_EQ(e.details().size(), 2u);
    EXPECT_EQ(to_string(Errc::PlacementExhausted), "PlacementExhausted");
}
