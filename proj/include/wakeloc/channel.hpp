#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "wakeloc/clock.hpp"
#include "wakeloc/core.hpp"

namespace wakeloc {

enum class RadioChannel { Uwb, WakeUp };

std::string_view to_string(RadioChannel ch);

struct ChannelParams {
    double uwb_range = 50.0;  // m
    double wuc_range = 20.0;  // m
    TimeDuration uwb_frame_airtime = TimeDuration::micros(170);
    TimeDuration wuc_airtime = TimeDuration::millis(55);
    double toa_noise_sigma = 0.1e-9;  // s
    double cfo_noise_sigma = 0.0;     // fraction

    double range(RadioChannel ch) const { return ch == RadioChannel::Uwb ? uwb_range : wuc_range; }

    // Returns one message per violated constraint.
    std::vector<std::string> violations() const;

    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

RadioChannel channel_of(const MessageKind& kind);
TimeDuration airtime(const MessageKind& kind, const ChannelParams& params);

struct TxId {
    std::uint64_t value = 0;
    friend auto operator<=>(const TxId&, const TxId&) = default;
};

struct Transmission {
    TxId id;
    NodeId sender;
    SessionAddress source;
    MessageKind kind;
    RadioChannel channel = RadioChannel::Uwb;
    Timestamp start;            // global, exact
    TimeDuration duration{};
    Position3 origin;
    ClockModel sender_clock;    // carrier for the CFO observable
    std::uint64_t round = 0;    // localization round this frame belongs to

    TimeInstant t_air_start() const { return start.rounded(); }
    TimeInstant t_air_end() const { return start.rounded() + duration; }
    Timestamp end() const { return start + duration; }
};

struct RxEvent {
    NodeId receiver;
    TxId tx;
    NodeId sender;
    SessionAddress source;
    MessageKind kind;
    RadioChannel channel = RadioChannel::Uwb;
    std::uint64_t round = 0;
    Timestamp arrival_global;   // first path, exact
    Timestamp local_timestamp;  // receiver clock, includes ToA noise
    double cfo = 1.0;           // sender rate / receiver rate as measured
};

struct Receiver {
    NodeId id;
    Position3 position;
    ClockModel clock;
};

// Exact propagation delay in picoseconds.
double propagation_delay_ps(const Position3& a, const Position3& b);
// Rounded to the nearest picosecond.
TimeDuration propagation_delay(const Position3& a, const Position3& b, const ChannelParams& params);

// Optional line-of-sight predicate; returns true when the a-b link is blocked.
using LinkBlocked = std::function<bool(const Position3&, const Position3&)>;

// Whether `tx` reaches `receiver` at all (range + optional blocking).
bool in_range(const Transmission& tx, const Position3& receiver, const ChannelParams& params,
              const LinkBlocked& blocked = {});

// Arrival interval of `tx` at `receiver` in global time.
struct ArrivalWindow {
    Timestamp start;
    Timestamp end;
};
ArrivalWindow arrival_window(const Transmission& tx, const Position3& receiver);

// Disk model, no capture effect. A transmission in range is delivered iff its
// arrival interval overlaps no other in-range arrival on the same channel.
// Noise draws come from `rng` in list order, one per delivered frame.
std::vector<RxEvent> arbitrate_receptions(const Receiver& receiver, std::span<const Transmission> concurrent,
                                          const ChannelParams& params, std::mt19937_64& rng,
                                          const LinkBlocked& blocked = {});

}  // namespace wakeloc
