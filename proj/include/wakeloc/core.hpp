#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wakeloc/error.hpp"

namespace wakeloc {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr std::int64_t kPicosPerSecond = 1'000'000'000'000;

// ---------------------------------------------------------------------------
// Space
// ---------------------------------------------------------------------------

struct Position3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    // Throws InvalidArgument on NaN/Inf.
    static Position3 checked(double x, double y, double z);

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

    friend bool operator==(const Position3&, const Position3&) = default;
};

inline Position3 operator+(Position3 a, Position3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Position3 operator-(Position3 a, Position3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Position3 operator*(double s, Position3 a) { return {s * a.x, s * a.y, s * a.z}; }

double distance(const Position3& a, const Position3& b);
double horizontal_distance(const Position3& a, const Position3& b);

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

// Signed picosecond count between two instants.
class TimeDuration {
public:
    constexpr TimeDuration() = default;
    constexpr explicit TimeDuration(std::int64_t picos) : ps_(picos) {}

    static constexpr TimeDuration picos(std::int64_t v) { return TimeDuration(v); }
    static constexpr TimeDuration nanos(std::int64_t v) { return TimeDuration(v * 1'000); }
    static constexpr TimeDuration micros(std::int64_t v) { return TimeDuration(v * 1'000'000); }
    static constexpr TimeDuration millis(std::int64_t v) { return TimeDuration(v * 1'000'000'000); }
    static constexpr TimeDuration seconds(std::int64_t v) { return TimeDuration(v * kPicosPerSecond); }
    // Rounds to the nearest picosecond.
    static TimeDuration from_seconds(double s);

    constexpr std::int64_t count() const { return ps_; }
    constexpr double to_seconds() const { return static_cast<double>(ps_) / static_cast<double>(kPicosPerSecond); }

    constexpr TimeDuration operator+(TimeDuration o) const { return TimeDuration(ps_ + o.ps_); }
    constexpr TimeDuration operator-(TimeDuration o) const { return TimeDuration(ps_ - o.ps_); }
    constexpr TimeDuration operator-() const { return TimeDuration(-ps_); }
    constexpr TimeDuration operator*(std::int64_t k) const { return TimeDuration(ps_ * k); }
    constexpr TimeDuration& operator+=(TimeDuration o) { ps_ += o.ps_; return *this; }
    constexpr TimeDuration& operator-=(TimeDuration o) { ps_ -= o.ps_; return *this; }
    constexpr auto operator<=>(const TimeDuration&) const = default;

private:
    std::int64_t ps_ = 0;
};

// Picoseconds since scenario start. The kernel orders events on this grid.
class TimeInstant {
public:
    constexpr TimeInstant() = default;
    constexpr explicit TimeInstant(std::int64_t picos) : ps_(picos) {}

    static TimeInstant from_seconds(double s) { return TimeInstant(TimeDuration::from_seconds(s).count()); }

    constexpr std::int64_t count() const { return ps_; }
    constexpr double to_seconds() const { return static_cast<double>(ps_) / static_cast<double>(kPicosPerSecond); }

    constexpr TimeInstant operator+(TimeDuration d) const { return TimeInstant(ps_ + d.count()); }
    constexpr TimeInstant operator-(TimeDuration d) const { return TimeInstant(ps_ - d.count()); }
    constexpr TimeDuration operator-(TimeInstant o) const { return TimeDuration(ps_ - o.ps_); }
    constexpr TimeInstant& operator+=(TimeDuration d) { ps_ += d.count(); return *this; }
    constexpr auto operator<=>(const TimeInstant&) const = default;

private:
    std::int64_t ps_ = 0;
};

// An instant with a sub-picosecond remainder, frac_ps in [-0.5, 0.5). Event ordering
// uses the rounded TimeInstant; timestamps and clock conversions keep the
// remainder so picosecond quantization does not leak into ranging.
struct Timestamp {
    std::int64_t ps = 0;
    double frac_ps = 0.0;

    constexpr Timestamp() = default;
    constexpr Timestamp(TimeInstant t) : ps(t.count()) {}  // NOLINT(implicit)
    static Timestamp from_parts(std::int64_t whole_ps, double extra_ps);

    TimeInstant rounded() const { return TimeInstant(ps); }
    double to_seconds() const;

    Timestamp plus_ps(double delta_ps) const;
    Timestamp plus_seconds(double s) const;
    Timestamp operator+(TimeDuration d) const { return from_parts(ps + d.count(), frac_ps); }

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
    friend std::partial_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
        if (a.ps != b.ps) return a.ps <=> b.ps;
        return a.frac_ps <=> b.frac_ps;
    }
};

// (a - b) in picoseconds / seconds, keeping the remainders.
double picos_between(const Timestamp& a, const Timestamp& b);
double seconds_between(const Timestamp& a, const Timestamp& b);

// ---------------------------------------------------------------------------
// Nodes
// ---------------------------------------------------------------------------

struct NodeId {
    std::uint32_t value = 0;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

// Per-localization random source address (privacy: the active tag's frames do
// not carry its NodeId).
struct SessionAddress {
    std::uint64_t value = 0;
    friend auto operator<=>(const SessionAddress&, const SessionAddress&) = default;
};

enum class NodeRole { Anchor, Tag };
enum class TagMode { Active, Passive };

std::string_view to_string(NodeRole role);

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

namespace msg {

struct WakeUpCall {
    friend bool operator==(const WakeUpCall&, const WakeUpCall&) = default;
};
// Empty responder list: every awake anchor that hears the poll answers.
struct Poll {
    std::vector<std::uint32_t> responders;
    friend bool operator==(const Poll&, const Poll&) = default;
};
struct Response {
    int anchor_index = 0;
    Position3 anchor_position;
    double reply_duration_local = 0.0;  // seconds, anchor clock
    SessionAddress in_reply_to;
    friend bool operator==(const Response&, const Response&) = default;
};
struct FinalBroadcast {
    Position3 estimated_position;
    friend bool operator==(const FinalBroadcast&, const FinalBroadcast&) = default;
};
struct FlexInit {
    Position3 anchor_position;
    std::uint64_t cycle = 0;
    friend bool operator==(const FlexInit&, const FlexInit&) = default;
};
struct FlexResponse {
    int anchor_index = 0;
    Position3 anchor_position;
    SessionAddress in_reply_to;
    friend bool operator==(const FlexResponse&, const FlexResponse&) = default;
};

}  // namespace msg

using MessageKind =
    std::variant<msg::WakeUpCall, msg::Poll, msg::Response, msg::FinalBroadcast, msg::FlexInit, msg::FlexResponse>;

std::string_view kind_name(const MessageKind& kind);

template <class T>
bool holds(const MessageKind& kind) {
    return std::holds_alternative<T>(kind);
}

}  // namespace wakeloc
