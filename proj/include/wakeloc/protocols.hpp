#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "wakeloc/channel.hpp"
#include "wakeloc/core.hpp"
#include "wakeloc/energy.hpp"
#include "wakeloc/solvers.hpp"

namespace wakeloc {

enum class Scheme { WakeLoc, FlexTdoa, ApTwr };

std::string_view to_string(Scheme s);
// Throws InvalidArgument for unknown names.
Scheme parse_scheme(std::string_view name);

// Response slots: anchor with slot i answers delta_t(i) after the poll (or
// initiator frame) reached it, frame start to frame start, on its own clock.
struct ResponseSchedule {
    TimeDuration first_reply = TimeDuration::micros(720);
    TimeDuration slot_gap = TimeDuration::micros(230);
    TimeDuration wakeup_settle = TimeDuration::micros(500);

    // delta_t(0) = first_reply - slot_gap is never used; i >= 1.
    TimeDuration delta_t(int i) const { return first_reply + slot_gap * i; }

    friend bool operator==(const ResponseSchedule&, const ResponseSchedule&) = default;
};

struct FlexParams {
    TimeDuration period = TimeDuration::seconds(1);          // T_F
    TimeDuration cell_stagger = TimeDuration::micros(2500);  // offset between cell rounds in a cycle
    TimeDuration wake_lead = TimeDuration::micros(200);      // receivers wake this early
    int cell_size = 5;
    int n_cells = 1;  // filled in from the layout

    friend bool operator==(const FlexParams&, const FlexParams&) = default;
};

// Everything a node's state machine needs besides its own identity. Shared
// read-only by every node of a scenario.
struct ProtocolContext {
    Scheme scheme = Scheme::WakeLoc;
    ResponseSchedule schedule;
    TimeDuration uwb_airtime = TimeDuration::micros(170);
    TimeDuration wuc_airtime = TimeDuration::millis(55);
    TimeDuration wakeup_latency = TimeDuration::micros(400);  // WuR interrupt to UWB receiver ready
    TimeDuration response_guard = TimeDuration::micros(10);
    TimeDuration solve_time = TimeDuration::micros(2200);
    int min_responses = 5;
    int max_slot = 5;   // highest response slot in the deployment
    int n_bound = 5;    // most anchors one round can involve; sizes the deaf period
    EnergyModel energy;
    SolverParams solver;
    TwrOptions twr;
    FlexParams flex;

    // Poll (or initiator frame) start to the last possible response end plus guard.
    TimeDuration response_window() const { return schedule.delta_t(max_slot) + uwb_airtime + response_guard; }
};

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

enum class OutcomeMode { Active, Passive, FlexTdoa, ApTwr };
enum class FailureReason {
    InsufficientResponses,
    NoPoll,
    NoFinalBroadcast,
    Busy,
    DegenerateGeometry,
    NoConvergence,
    AllWeightsZero,
    Truncated,
};

std::string_view to_string(OutcomeMode m);
std::string_view to_string(FailureReason r);

struct LocalizationOutcome {
    NodeId node;
    OutcomeMode mode = OutcomeMode::Active;
    std::uint64_t round = 0;
    std::optional<Position3> estimate;
    std::optional<FailureReason> failure;
    int n_responses_used = 0;
    TimeDuration latency{};         // trigger (or wake) to estimate, node clock
    bool refined = true;            // false: particle filter fell back to its mean
    std::optional<Position3> truth; // filled in by the kernel
    std::vector<TwrMeasurement> twr;
    std::vector<double> ranges;     // raw, per twr entry
    std::vector<TdoaMeasurement> tdoa;

    bool success() const { return estimate.has_value(); }
};

// ---------------------------------------------------------------------------
// Events and actions
// ---------------------------------------------------------------------------

// Sleep: only the wake-up receiver listens. Done: round finished, radios off
// until the round's energy block closes.
enum class RadioMode { Sleep, WakeupTx, WakingUp, Listening, Transmitting, Processing, Done };

std::string_view to_string(RadioMode m);

enum class TimerId {
    Ready,
    PollTimeout,
    Respond,
    SettleDone,
    CollectDeadline,
    SolveDone,
    FinalTimeout,
    WindowEnd,
    Rest,
};

std::string_view to_string(TimerId id);

namespace ev {
struct Rx {
    RxEvent frame;
    Timestamp now;  // local time at delivery
};
struct TxDone {
    MessageKind kind;
    Timestamp now;
};
struct TimerFired {
    TimerId id;
    Timestamp t_local;  // nominal local expiry
};
struct Trigger {
    Timestamp now;
    std::uint64_t round = 0;
    std::vector<std::uint32_t> responders;  // AP-TWR addressing
};
}  // namespace ev

using ProtocolEvent = std::variant<ev::Rx, ev::TxDone, ev::TimerFired, ev::Trigger>;

namespace act {
struct StartTx {
    MessageKind kind;
    Timestamp t_local;
    SessionAddress source;
    std::uint64_t round = 0;
};
struct ArmTimer {
    TimerId id;
    Timestamp t_local;
};
struct CancelTimer {
    TimerId id;
};
struct EnterPowerState {
    RadioMode mode;
};
// Opens an energy block; its length and cost follow from the role and the
// round's anchor count once the round is over.
struct BeginActivity {
    PowerState kind;
    EnergyRole role;
    Timestamp t_local;
    std::uint64_t round = 0;
};
struct EmitOutcome {
    LocalizationOutcome outcome;
};
}  // namespace act

using Action = std::variant<act::StartTx, act::ArmTimer, act::CancelTimer, act::EnterPowerState, act::BeginActivity,
                            act::EmitOutcome>;
using Actions = std::vector<Action>;

// ---------------------------------------------------------------------------
// Role machines
// ---------------------------------------------------------------------------

// Source address of infrastructure frames; anchors have nothing to hide.
inline SessionAddress fixed_address(NodeId id) {
    return SessionAddress{0x8000'0000'0000'0000ULL | id.value};
}

// WakeLoc anchor (woken by WuC) and always-listening AP-TWR anchor.
class ResponderAnchor {
public:
    enum class Phase { Sleep, WakingUp, AwaitPoll, RespondScheduled, Responding, Done };

    ResponderAnchor(NodeId id, int slot, Position3 position);

    Actions start(const ProtocolContext& ctx);
    Actions advance(const ProtocolEvent& event, const ProtocolContext& ctx);

    Phase phase() const { return phase_; }
    int slot() const { return slot_; }

private:
    Actions finish_round(const Timestamp& now, const ProtocolContext& ctx);

    NodeId id_;
    int slot_;
    Position3 position_;
    Phase phase_ = Phase::Sleep;
    std::uint64_t round_ = 0;
    SessionAddress session_;
    Timestamp poll_rx_;
    Timestamp wake_end_;
};

// WakeLoc tag (active on trigger, passive when woken by another tag's WuC)
// and AP-TWR tag (active only, no wake-up call).
class LocalizingTag {
public:
    enum class Phase {
        Sleep,
        SendingWuC,
        SettleWait,
        SendingPoll,
        CollectResponses,
        Solving,
        Broadcasting,
        WokenListening,
        AwaitFinal,
        PassiveSolving,
        Done,
    };

    LocalizingTag(NodeId id, std::uint64_t seed);

    Actions start(const ProtocolContext& ctx);
    Actions advance(const ProtocolEvent& event, const ProtocolContext& ctx);

    Phase phase() const { return phase_; }
    std::size_t responses_heard() const { return responses_.size(); }

private:
    Actions on_trigger(const ev::Trigger& t, const ProtocolContext& ctx);
    Actions on_rx(const ev::Rx& rx, const ProtocolContext& ctx);
    Actions on_timer(const ev::TimerFired& t, const ProtocolContext& ctx);
    Actions on_tx_done(const ev::TxDone& d, const ProtocolContext& ctx);
    void solve_active(const ProtocolContext& ctx);
    void solve_passive(const Position3& initiator, const ProtocolContext& ctx);
    Actions finish(const Timestamp& now, EnergyRole role, const ProtocolContext& ctx, bool emit);
    OutcomeMode active_mode(const ProtocolContext& ctx) const;

    NodeId id_;
    std::mt19937_64 rng_;
    Phase phase_ = Phase::Sleep;
    std::uint64_t round_ = 0;
    SessionAddress session_;
    Timestamp t_start_;   // trigger (active) or WuC arrival (passive)
    Timestamp t_poll_;    // poll TX (active) or RX (passive)
    Timestamp t_final_;
    std::vector<std::uint32_t> responders_;
    std::optional<RxEvent> poll_rx_;
    std::vector<RxEvent> responses_;
    LocalizationOutcome pending_;
};

// FlexTDOA anchor. The cell initiator fires on every cycle trigger; the other
// members wake on their trigger and answer the initiator frame.
class FlexAnchor {
public:
    enum class Phase { Sleep, Listening, RespondScheduled, Responding, Done };

    FlexAnchor(NodeId id, int slot, Position3 position, NodeId initiator, int cell_members);

    Actions start(const ProtocolContext& ctx);
    Actions advance(const ProtocolEvent& event, const ProtocolContext& ctx);

    bool is_initiator() const { return id_.value == initiator_.value; }
    Phase phase() const { return phase_; }

private:
    Actions rest(const Timestamp& block_start, const Timestamp& now, const ProtocolContext& ctx);

    NodeId id_;
    int slot_;
    Position3 position_;
    NodeId initiator_;
    int cell_members_;
    Phase phase_ = Phase::Sleep;
    std::uint64_t round_ = 0;
    Timestamp init_rx_;
};

// FlexTDOA tag: listens through one cycle, solves on the best-heard cell.
class FlexTag {
public:
    enum class Phase { Sleep, Listening, Solving, Done };

    FlexTag(NodeId id, std::uint64_t seed);

    Actions start(const ProtocolContext& ctx);
    Actions advance(const ProtocolEvent& event, const ProtocolContext& ctx);

    Phase phase() const { return phase_; }

    // Wake lead plus the span of all cell rounds in a cycle.
    static TimeDuration listen_window(const ProtocolContext& ctx);

private:
    NodeId id_;
    std::mt19937_64 rng_;
    Phase phase_ = Phase::Sleep;
    Timestamp t_listen_;
    std::vector<RxEvent> frames_;
    LocalizationOutcome pending_;
};

// Analytic trigger-to-estimate latency of a collision-free round in which the
// tag waits for `n` response slots. FlexTDOA: tag wake to estimate.
TimeDuration end_to_end_latency(Scheme scheme, int n, const ProtocolContext& ctx);

}  // namespace wakeloc
