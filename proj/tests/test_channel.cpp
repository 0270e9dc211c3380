#include <gtest/gtest.h>

#include <random>

#include "wakeloc/channel.hpp"
#include "wakeloc/clock.hpp"
#include "wakeloc/error.hpp"

using namespace wakeloc;

namespace {

Transmission frame(std::uint64_t id, std::uint32_t sender, Position3 origin, Timestamp start, MessageKind kind,
                   const ChannelParams& p) {
    Transmission tx;
    tx.id = TxId{id};
    tx.sender = NodeId{sender};
    tx.kind = kind;
    tx.channel = channel_of(kind);
    tx.start = start;
    tx.duration = airtime(kind, p);
    tx.origin = origin;
    return tx;
}

ChannelParams noiseless() {
    ChannelParams p;
    p.toa_noise_sigma = 0.0;
    return p;
}

}  // namespace

TEST(Propagation, Examples) {
    const ChannelParams p;
    EXPECT_EQ(propagation_delay({0, 0, 0}, {0, 0, 0}, p).count(), 0);
    EXPECT_EQ(propagation_delay({0, 0, 0}, {299.792458, 0, 0}, p).count(), 1'000'000);
    EXPECT_EQ(propagation_delay({0, 0, 0}, {20, 0, 0}, p).count(), 66'713);
    EXPECT_NEAR(propagation_delay_ps({0, 0, 0}, {20, 0, 0}), 66'712.819, 1e-3);
}

TEST(Channel, ParamsValidation) {
    ChannelParams p;
    EXPECT_TRUE(p.violations().empty());
    p.wuc_range = 60.0;
    EXPECT_FALSE(p.violations().empty());
    p = ChannelParams{};
    p.uwb_frame_airtime = TimeDuration{};
    EXPECT_FALSE(p.violations().empty());
}

TEST(Channel, AirtimeByKind) {
    const ChannelParams p;
    EXPECT_EQ(channel_of(msg::WakeUpCall{}), RadioChannel::WakeUp);
    EXPECT_EQ(channel_of(msg::Poll{}), RadioChannel::Uwb);
    EXPECT_EQ(airtime(msg::WakeUpCall{}, p), TimeDuration::millis(55));
    EXPECT_EQ(airtime(msg::Response{}, p), TimeDuration::micros(170));
    const auto tx = frame(1, 0, {}, Timestamp{}, msg::Poll{}, p);
    EXPECT_EQ(tx.t_air_end() - tx.t_air_start(), p.uwb_frame_airtime);
}

TEST(Arbitration, SingleFrameTimestamp) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    ClockModel rx_clock;
    rx_clock.skew = 3e-6;
    rx_clock.offset = TimeDuration::micros(12);
    const Receiver rx{NodeId{9}, {10, 0, 0}, rx_clock};
    const Timestamp start(TimeInstant::from_seconds(0.5));
    const std::vector<Transmission> txs{frame(1, 0, {0, 0, 0}, start, msg::Poll{}, p)};
    const auto out = arbitrate_receptions(rx, txs, p, rng);
    ASSERT_EQ(out.size(), 1u);
    const Timestamp expected = to_local(start.plus_ps(propagation_delay_ps({0, 0, 0}, {10, 0, 0})), rx_clock);
    EXPECT_NEAR(picos_between(out[0].local_timestamp, expected), 0.0, 1e-6);
    EXPECT_EQ(out[0].sender.value, 0u);
}

TEST(Arbitration, OverlapByOnePicosecondCollides) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {0, 0, 0}, {}};
    const Position3 origin{0, 0, 0};
    const Timestamp t0(TimeInstant(1'000'000));
    auto a = frame(1, 0, origin, t0, msg::Poll{}, p);
    auto b = frame(2, 1, origin, t0 + (p.uwb_frame_airtime - TimeDuration::picos(1)), msg::Poll{}, p);
    EXPECT_TRUE(arbitrate_receptions(rx, std::vector<Transmission>{a, b}, p, rng).empty());
    b.start = t0 + p.uwb_frame_airtime;
    EXPECT_EQ(arbitrate_receptions(rx, std::vector<Transmission>{a, b}, p, rng).size(), 2u);
}

TEST(Arbitration, ChannelsDoNotInterfere) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {5, 0, 0}, {}};
    const Timestamp t0(TimeInstant(0));
    auto wuc = frame(1, 0, {0, 0, 0}, t0, msg::WakeUpCall{}, p);
    auto poll = frame(2, 1, {0, 0, 0}, t0, msg::Poll{}, p);
    EXPECT_EQ(arbitrate_receptions(rx, std::vector<Transmission>{wuc, poll}, p, rng).size(), 2u);
}

TEST(Arbitration, OutOfWakeUpRange) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {25, 0, 0}, {}};
    const std::vector<Transmission> txs{frame(1, 0, {0, 0, 0}, Timestamp{}, msg::WakeUpCall{}, p)};
    EXPECT_TRUE(arbitrate_receptions(rx, txs, p, rng).empty());
    EXPECT_FALSE(in_range(txs[0], {25, 0, 0}, p));
    EXPECT_TRUE(in_range(txs[0], {19.9, 0, 0}, p));
}

TEST(Arbitration, OutOfRangeFrameDoesNotCollide) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {0, 0, 0}, {}};
    auto near = frame(1, 0, {10, 0, 0}, Timestamp{}, msg::Poll{}, p);
    auto far = frame(2, 1, {80, 0, 0}, Timestamp{}, msg::Poll{}, p);
    EXPECT_EQ(arbitrate_receptions(rx, std::vector<Transmission>{near, far}, p, rng).size(), 1u);
}

TEST(Arbitration, BlockedLink) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {10, 0, 0}, {}};
    const std::vector<Transmission> txs{frame(1, 0, {0, 0, 0}, Timestamp{}, msg::Poll{}, p)};
    const LinkBlocked wall = [](const Position3&, const Position3&) { return true; };
    EXPECT_TRUE(arbitrate_receptions(rx, txs, p, rng, wall).empty());
}

TEST(Arbitration, OwnFrameIgnored) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{0}, {0, 0, 0}, {}};
    const std::vector<Transmission> txs{frame(1, 0, {0, 0, 0}, Timestamp{}, msg::Poll{}, p)};
    EXPECT_TRUE(arbitrate_receptions(rx, txs, p, rng).empty());
}

TEST(Arbitration, CfoReported) {
    const ChannelParams p = noiseless();
    std::mt19937_64 rng(1);
    const Receiver rx{NodeId{9}, {3, 0, 0}, {}};
    auto tx = frame(1, 0, {0, 0, 0}, Timestamp{}, msg::Response{}, p);
    tx.sender_clock.skew = 1e-5;
    const auto out = arbitrate_receptions(rx, std::vector<Transmission>{tx}, p, rng);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0].cfo, 1.00001);
}
