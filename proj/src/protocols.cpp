#include "wakeloc/protocols.hpp"

#include <algorithm>
#include <map>

namespace wakeloc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

TimeDuration block_length(EnergyRole role, int n, const ProtocolContext& ctx) {
    return TimeDuration::from_seconds(localization_duration(role, std::max(n, 1), ctx.energy));
}

TimeDuration rounded(double ps) {
    return TimeDuration(static_cast<std::int64_t>(std::llround(ps)));
}

Timestamp later(const Timestamp& a, const Timestamp& b) {
    return a < b ? b : a;
}

std::size_t solver_minimum(const ProtocolContext& ctx) {
    return ctx.solver.dimension == SolveDimension::TwoD ? 3 : 4;
}

FailureReason reason_of(const Error& e) {
    switch (e.code()) {
        case Errc::DegenerateGeometry: return FailureReason::DegenerateGeometry;
        case Errc::NoConvergence: return FailureReason::NoConvergence;
        case Errc::AllWeightsZero: return FailureReason::AllWeightsZero;
        default: return FailureReason::InsufficientResponses;
    }
}

}  // namespace

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::WakeLoc: return "wakeloc";
        case Scheme::FlexTdoa: return "flextdoa";
        case Scheme::ApTwr: return "aptwr";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "wakeloc") return Scheme::WakeLoc;
    if (name == "flextdoa") return Scheme::FlexTdoa;
    if (name == "aptwr") return Scheme::ApTwr;
    throw Error(Errc::InvalidArgument, "unknown scheme '" + std::string(name) + "' (wakeloc, flextdoa, aptwr)");
}

std::string_view to_string(OutcomeMode m) {
    switch (m) {
        case OutcomeMode::Active: return "active";
        case OutcomeMode::Passive: return "passive";
        case OutcomeMode::FlexTdoa: return "flextdoa";
        case OutcomeMode::ApTwr: return "aptwr";
    }
    return "?";
}

std::string_view to_string(FailureReason r) {
    switch (r) {
        case FailureReason::InsufficientResponses: return "insufficient_responses";
        case FailureReason::NoPoll: return "no_poll";
        case FailureReason::NoFinalBroadcast: return "no_final_broadcast";
        case FailureReason::Busy: return "busy";
        case FailureReason::DegenerateGeometry: return "degenerate_geometry";
        case FailureReason::NoConvergence: return "no_convergence";
        case FailureReason::AllWeightsZero: return "all_weights_zero";
        case FailureReason::Truncated: return "truncated";
    }
    return "?";
}

std::string_view to_string(RadioMode m) {
    switch (m) {
        case RadioMode::Sleep: return "sleep";
        case RadioMode::WakeupTx: return "wakeup_tx";
        case RadioMode::WakingUp: return "waking_up";
        case RadioMode::Listening: return "listening";
        case RadioMode::Transmitting: return "transmitting";
        case RadioMode::Processing: return "processing";
        case RadioMode::Done: return "done";
    }
    return "?";
}

std::string_view to_string(TimerId id) {
    switch (id) {
        case TimerId::Ready: return "ready";
        case TimerId::PollTimeout: return "poll_timeout";
        case TimerId::Respond: return "respond";
        case TimerId::SettleDone: return "settle_done";
        case TimerId::CollectDeadline: return "collect_deadline";
        case TimerId::SolveDone: return "solve_done";
        case TimerId::FinalTimeout: return "final_timeout";
        case TimerId::WindowEnd: return "window_end";
        case TimerId::Rest: return "rest";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// ResponderAnchor
// ---------------------------------------------------------------------------

ResponderAnchor::ResponderAnchor(NodeId id, int slot, Position3 position)
    : id_(id), slot_(slot), position_(position) {
    if (slot < 1) throw Error(Errc::InvalidArgument, "response slot must be >= 1");
}

Actions ResponderAnchor::start(const ProtocolContext& ctx) {
    if (ctx.scheme == Scheme::ApTwr) {
        phase_ = Phase::AwaitPoll;
        return {act::EnterPowerState{RadioMode::Listening}};
    }
    phase_ = Phase::Sleep;
    return {act::EnterPowerState{RadioMode::Sleep}};
}

Actions ResponderAnchor::finish_round(const Timestamp& now, const ProtocolContext& ctx) {
    phase_ = Phase::Done;
    const Timestamp rest = later(now, poll_rx_ + block_length(EnergyRole::Anchor, ctx.n_bound, ctx));
    return {act::EnterPowerState{RadioMode::Done}, act::ArmTimer{TimerId::Rest, rest}};
}

Actions ResponderAnchor::advance(const ProtocolEvent& event, const ProtocolContext& ctx) {
    const bool always_on = ctx.scheme == Scheme::ApTwr;
    return std::visit(
        overloaded{
            [&](const ev::Rx& rx) -> Actions {
                const auto& f = rx.frame;
                if (holds<msg::WakeUpCall>(f.kind) && phase_ == Phase::Sleep && !always_on) {
                    phase_ = Phase::WakingUp;
                    round_ = f.round;
                    wake_end_ = rx.now;
                    return {act::BeginActivity{PowerState::WakeUp, EnergyRole::Anchor, f.local_timestamp, f.round},
                            act::EnterPowerState{RadioMode::WakingUp},
                            act::ArmTimer{TimerId::Ready, rx.now + ctx.wakeup_latency}};
                }
                if (const auto* poll = std::get_if<msg::Poll>(&f.kind); poll && phase_ == Phase::AwaitPoll) {
                    if (!poll->responders.empty() &&
                        std::find(poll->responders.begin(), poll->responders.end(), id_.value) == poll->responders.end()) {
                        return {};
                    }
                    phase_ = Phase::RespondScheduled;
                    round_ = f.round;
                    session_ = f.source;
                    poll_rx_ = f.local_timestamp;
                    Actions out;
                    if (!always_on) out.push_back(act::CancelTimer{TimerId::PollTimeout});
                    out.push_back(act::BeginActivity{PowerState::Localization, EnergyRole::Anchor, poll_rx_, round_});
                    out.push_back(act::EnterPowerState{RadioMode::Processing});
                    out.push_back(act::ArmTimer{TimerId::Respond, poll_rx_ + ctx.schedule.delta_t(slot_)});
                    return out;
                }
                return {};
            },
            [&](const ev::TimerFired& t) -> Actions {
                switch (t.id) {
                    case TimerId::Ready:
                        if (phase_ != Phase::WakingUp) return {};
                        phase_ = Phase::AwaitPoll;
                        return {act::EnterPowerState{RadioMode::Listening},
                                act::ArmTimer{TimerId::PollTimeout, wake_end_ + ctx.schedule.wakeup_settle +
                                                                        ctx.uwb_airtime + ctx.response_guard}};
                    case TimerId::PollTimeout:
                        if (phase_ != Phase::AwaitPoll || always_on) return {};
                        phase_ = Phase::Sleep;
                        return {act::EnterPowerState{RadioMode::Sleep}};
                    case TimerId::Respond: {
                        if (phase_ != Phase::RespondScheduled) return {};
                        phase_ = Phase::Responding;
                        msg::Response r{slot_, position_, seconds_between(t.t_local, poll_rx_), session_};
                        return {act::EnterPowerState{RadioMode::Transmitting},
                                act::StartTx{r, t.t_local, fixed_address(id_), round_}};
                    }
                    case TimerId::Rest:
                        if (phase_ != Phase::Done) return {};
                        if (always_on) {
                            phase_ = Phase::AwaitPoll;
                            return {act::EnterPowerState{RadioMode::Listening}};
                        }
                        phase_ = Phase::Sleep;
                        return {act::EnterPowerState{RadioMode::Sleep}};
                    default:
                        return {};
                }
            },
            [&](const ev::TxDone& d) -> Actions {
                if (phase_ != Phase::Responding) return {};
                return finish_round(d.now, ctx);
            },
            [&](const ev::Trigger&) -> Actions { return {}; },
        },
        event);
}

// ---------------------------------------------------------------------------
// LocalizingTag
// ---------------------------------------------------------------------------

LocalizingTag::LocalizingTag(NodeId id, std::uint64_t seed) : id_(id), rng_(seed) {}

Actions LocalizingTag::start(const ProtocolContext&) {
    phase_ = Phase::Sleep;
    return {act::EnterPowerState{RadioMode::Sleep}};
}

OutcomeMode LocalizingTag::active_mode(const ProtocolContext& ctx) const {
    return ctx.scheme == Scheme::ApTwr ? OutcomeMode::ApTwr : OutcomeMode::Active;
}

Actions LocalizingTag::advance(const ProtocolEvent& event, const ProtocolContext& ctx) {
    return std::visit(overloaded{
                          [&](const ev::Trigger& t) { return on_trigger(t, ctx); },
                          [&](const ev::Rx& rx) { return on_rx(rx, ctx); },
                          [&](const ev::TimerFired& t) { return on_timer(t, ctx); },
                          [&](const ev::TxDone& d) { return on_tx_done(d, ctx); },
                      },
                      event);
}

Actions LocalizingTag::on_trigger(const ev::Trigger& t, const ProtocolContext& ctx) {
    if (phase_ != Phase::Sleep) {
        LocalizationOutcome o;
        o.node = id_;
        o.mode = active_mode(ctx);
        o.round = t.round;
        o.failure = FailureReason::Busy;
        return {act::EmitOutcome{std::move(o)}};
    }
    round_ = t.round;
    session_ = SessionAddress{rng_()};
    t_start_ = t.now;
    responses_.clear();
    poll_rx_.reset();
    responders_ = t.responders;
    pending_ = LocalizationOutcome{};
    pending_.node = id_;
    pending_.mode = active_mode(ctx);
    pending_.round = round_;

    if (ctx.scheme == Scheme::WakeLoc) {
        phase_ = Phase::SendingWuC;
        return {act::BeginActivity{PowerState::WakeUp, EnergyRole::ActiveTag, t.now, round_},
                act::EnterPowerState{RadioMode::WakeupTx},
                act::StartTx{msg::WakeUpCall{}, t.now, session_, round_},
                act::ArmTimer{TimerId::SettleDone, t.now + ctx.wuc_airtime + ctx.schedule.wakeup_settle}};
    }
    // AP-TWR: anchor receivers are always on, poll right away.
    return on_timer(ev::TimerFired{TimerId::SettleDone, t.now}, ctx);
}

Actions LocalizingTag::on_rx(const ev::Rx& rx, const ProtocolContext& ctx) {
    const auto& f = rx.frame;
    if (holds<msg::WakeUpCall>(f.kind)) {
        if (phase_ != Phase::Sleep || ctx.scheme != Scheme::WakeLoc) return {};
        phase_ = Phase::WokenListening;
        round_ = f.round;
        t_start_ = f.local_timestamp;
        responses_.clear();
        poll_rx_.reset();
        pending_ = LocalizationOutcome{};
        pending_.node = id_;
        pending_.mode = OutcomeMode::Passive;
        pending_.round = round_;
        return {act::BeginActivity{PowerState::WakeUp, EnergyRole::PassiveTag, f.local_timestamp, f.round},
                act::EnterPowerState{RadioMode::WakingUp},
                act::ArmTimer{TimerId::Ready, rx.now + ctx.wakeup_latency},
                act::ArmTimer{TimerId::PollTimeout,
                              rx.now + ctx.schedule.wakeup_settle + ctx.uwb_airtime + ctx.response_guard}};
    }
    if (holds<msg::Poll>(f.kind)) {
        if (phase_ != Phase::WokenListening) return {};
        phase_ = Phase::AwaitFinal;
        poll_rx_ = f;
        session_ = f.source;
        round_ = f.round;
        pending_.round = round_;
        t_poll_ = f.local_timestamp;
        const Timestamp deadline =
            t_poll_ + ctx.response_window() + ctx.solve_time + ctx.uwb_airtime + ctx.response_guard;
        return {act::CancelTimer{TimerId::PollTimeout},
                act::BeginActivity{PowerState::Localization, EnergyRole::PassiveTag, t_poll_, round_},
                act::ArmTimer{TimerId::FinalTimeout, deadline}};
    }
    if (const auto* r = std::get_if<msg::Response>(&f.kind)) {
        if ((phase_ != Phase::CollectResponses && phase_ != Phase::AwaitFinal) || r->in_reply_to != session_) return {};
        const bool dup = std::any_of(responses_.begin(), responses_.end(),
                                     [&](const RxEvent& e) { return e.sender == f.sender; });
        if (!dup) responses_.push_back(f);
        return {};
    }
    if (const auto* fin = std::get_if<msg::FinalBroadcast>(&f.kind)) {
        if (phase_ != Phase::AwaitFinal || f.source != session_) return {};
        Actions out{act::CancelTimer{TimerId::FinalTimeout}};
        const std::size_t need = std::max<std::size_t>(static_cast<std::size_t>(ctx.min_responses), solver_minimum(ctx));
        if (responses_.size() < need) {
            pending_.failure = FailureReason::InsufficientResponses;
            pending_.n_responses_used = static_cast<int>(responses_.size());
            pending_.latency = rounded(picos_between(rx.now, t_start_));
            out.push_back(act::EmitOutcome{pending_});
            auto rest = finish(rx.now, EnergyRole::PassiveTag, ctx, false);
            out.insert(out.end(), rest.begin(), rest.end());
            return out;
        }
        solve_passive(fin->estimated_position, ctx);
        phase_ = Phase::PassiveSolving;
        out.push_back(act::EnterPowerState{RadioMode::Processing});
        out.push_back(act::ArmTimer{TimerId::SolveDone, f.local_timestamp + ctx.uwb_airtime + ctx.solve_time});
        return out;
    }
    return {};
}

Actions LocalizingTag::on_timer(const ev::TimerFired& t, const ProtocolContext& ctx) {
    switch (t.id) {
        case TimerId::SettleDone: {
            if (phase_ != Phase::SendingWuC && phase_ != Phase::SettleWait && phase_ != Phase::Sleep) return {};
            phase_ = Phase::SendingPoll;
            t_poll_ = t.t_local;
            msg::Poll poll;
            if (ctx.scheme == Scheme::ApTwr) poll.responders = responders_;
            return {act::BeginActivity{PowerState::Localization, EnergyRole::ActiveTag, t_poll_, round_},
                    act::EnterPowerState{RadioMode::Transmitting},
                    act::StartTx{poll, t_poll_, session_, round_},
                    act::ArmTimer{TimerId::CollectDeadline, t_poll_ + ctx.response_window()}};
        }
        case TimerId::CollectDeadline: {
            if (phase_ != Phase::CollectResponses && phase_ != Phase::SendingPoll) return {};
            solve_active(ctx);
            if (pending_.failure) {
                pending_.latency = rounded(picos_between(t.t_local, t_start_));
                Actions out{act::EmitOutcome{pending_}};
                auto rest = finish(t.t_local, EnergyRole::ActiveTag, ctx, false);
                out.insert(out.end(), rest.begin(), rest.end());
                return out;
            }
            phase_ = Phase::Solving;
            return {act::EnterPowerState{RadioMode::Processing},
                    act::ArmTimer{TimerId::SolveDone, t.t_local + ctx.solve_time}};
        }
        case TimerId::SolveDone: {
            if (phase_ == Phase::Solving) {
                phase_ = Phase::Broadcasting;
                t_final_ = t.t_local;
                return {act::EnterPowerState{RadioMode::Transmitting},
                        act::StartTx{msg::FinalBroadcast{*pending_.estimate}, t.t_local, session_, round_}};
            }
            if (phase_ == Phase::PassiveSolving) {
                pending_.latency = rounded(picos_between(t.t_local, t_start_));
                Actions out{act::EmitOutcome{pending_}};
                auto rest = finish(t.t_local, EnergyRole::PassiveTag, ctx, false);
                out.insert(out.end(), rest.begin(), rest.end());
                return out;
            }
            return {};
        }
        case TimerId::Ready:
            if (phase_ != Phase::WokenListening) return {};
            return {act::EnterPowerState{RadioMode::Listening}};
        case TimerId::PollTimeout: {
            if (phase_ != Phase::WokenListening) return {};
            phase_ = Phase::Sleep;
            pending_.failure = FailureReason::NoPoll;
            pending_.latency = rounded(picos_between(t.t_local, t_start_));
            return {act::EmitOutcome{pending_}, act::EnterPowerState{RadioMode::Sleep}};
        }
        case TimerId::FinalTimeout: {
            if (phase_ != Phase::AwaitFinal) return {};
            pending_.failure = FailureReason::NoFinalBroadcast;
            pending_.n_responses_used = static_cast<int>(responses_.size());
            pending_.latency = rounded(picos_between(t.t_local, t_start_));
            Actions out{act::EmitOutcome{pending_}};
            auto rest = finish(t.t_local, EnergyRole::PassiveTag, ctx, false);
            out.insert(out.end(), rest.begin(), rest.end());
            return out;
        }
        case TimerId::Rest:
            if (phase_ != Phase::Done) return {};
            phase_ = Phase::Sleep;
            return {act::EnterPowerState{RadioMode::Sleep}};
        default:
            return {};
    }
}

Actions LocalizingTag::on_tx_done(const ev::TxDone& d, const ProtocolContext& ctx) {
    if (holds<msg::WakeUpCall>(d.kind) && phase_ == Phase::SendingWuC) {
        phase_ = Phase::SettleWait;
        return {act::EnterPowerState{RadioMode::Processing}};
    }
    if (holds<msg::Poll>(d.kind) && phase_ == Phase::SendingPoll) {
        phase_ = Phase::CollectResponses;
        return {act::EnterPowerState{RadioMode::Listening}};
    }
    if (holds<msg::FinalBroadcast>(d.kind) && phase_ == Phase::Broadcasting) {
        pending_.latency = rounded(picos_between(t_final_ + ctx.uwb_airtime, t_start_));
        return finish(d.now, EnergyRole::ActiveTag, ctx, true);
    }
    return {};
}

Actions LocalizingTag::finish(const Timestamp& now, EnergyRole role, const ProtocolContext& ctx, bool emit) {
    Actions out;
    if (emit) out.push_back(act::EmitOutcome{pending_});
    phase_ = Phase::Done;
    const Timestamp rest = later(now, t_poll_ + block_length(role, ctx.n_bound, ctx));
    out.push_back(act::EnterPowerState{RadioMode::Done});
    out.push_back(act::ArmTimer{TimerId::Rest, rest});
    return out;
}

void LocalizingTag::solve_active(const ProtocolContext& ctx) {
    std::vector<RangeObservation> obs;
    for (const auto& rx : responses_) {
        const auto& r = std::get<msg::Response>(rx.kind);
        TwrMeasurement m;
        m.anchor_position = r.anchor_position;
        m.t_round_local = seconds_between(rx.local_timestamp, t_poll_);
        m.t_reply_nominal = ctx.schedule.delta_t(r.anchor_index).to_seconds();
        m.t_reply_reported = r.reply_duration_local;
        m.cfo = rx.cfo;
        try {
            const double range = cc_ss_twr_range(m, ctx.twr);
            pending_.twr.push_back(m);
            pending_.ranges.push_back(range);
            obs.push_back({r.anchor_position, range});
        } catch (const Error& e) {
            // corrupt measurement: dropped
        }
    }
    pending_.n_responses_used = static_cast<int>(obs.size());
    if (obs.size() < std::max<std::size_t>(static_cast<std::size_t>(ctx.min_responses), solver_minimum(ctx))) {
        pending_.failure = FailureReason::InsufficientResponses;
        return;
    }
    try {
        pending_.estimate = trilaterate(obs, ctx.solver).position;
    } catch (const Error& e) {
        pending_.failure = reason_of(e);
    }
}

void LocalizingTag::solve_passive(const Position3& initiator, const ProtocolContext& ctx) {
    std::vector<TdoaMeasurement> ms;
    TdoaMeasurement ref;
    ref.anchor_position = initiator;
    ref.initiator_position = initiator;
    ref.cfo = poll_rx_->cfo;
    ref.t_arrival_local = poll_rx_->local_timestamp;
    ref.reference = true;
    ms.push_back(ref);
    for (const auto& rx : responses_) {
        const auto& r = std::get<msg::Response>(rx.kind);
        TdoaMeasurement m;
        m.anchor_index = r.anchor_index;
        m.anchor_position = r.anchor_position;
        m.initiator_position = initiator;
        m.delta_t = r.reply_duration_local;
        m.cfo = rx.cfo;
        m.t_arrival_local = rx.local_timestamp;
        ms.push_back(m);
    }
    pending_.tdoa = ms;
    pending_.n_responses_used = static_cast<int>(responses_.size());
    try {
        const auto sol = particle_filter_solve(ms, ctx.solver, rng_);
        pending_.estimate = sol.position;
        pending_.refined = sol.refined;
    } catch (const Error& e) {
        pending_.failure = reason_of(e);
    }
}

// ---------------------------------------------------------------------------
// FlexAnchor
// ---------------------------------------------------------------------------

FlexAnchor::FlexAnchor(NodeId id, int slot, Position3 position, NodeId initiator, int cell_members)
    : id_(id), slot_(slot), position_(position), initiator_(initiator), cell_members_(cell_members) {
    if (!is_initiator() && slot < 1) throw Error(Errc::InvalidArgument, "responder slot must be >= 1");
}

Actions FlexAnchor::start(const ProtocolContext&) {
    phase_ = Phase::Sleep;
    return {act::EnterPowerState{RadioMode::Sleep}};
}

Actions FlexAnchor::rest(const Timestamp& block_start, const Timestamp& now, const ProtocolContext& ctx) {
    phase_ = Phase::Done;
    const Timestamp until = later(now, block_start + block_length(EnergyRole::Anchor, cell_members_, ctx));
    return {act::EnterPowerState{RadioMode::Done}, act::ArmTimer{TimerId::Rest, until}};
}

Actions FlexAnchor::advance(const ProtocolEvent& event, const ProtocolContext& ctx) {
    return std::visit(
        overloaded{
            [&](const ev::Trigger& t) -> Actions {
                if (phase_ != Phase::Sleep) return {};
                round_ = t.round;
                if (is_initiator()) {
                    phase_ = Phase::Responding;
                    init_rx_ = t.now;
                    return {act::BeginActivity{PowerState::Localization, EnergyRole::Anchor, t.now, round_},
                            act::EnterPowerState{RadioMode::Transmitting},
                            act::StartTx{msg::FlexInit{position_, t.round}, t.now, fixed_address(id_), round_}};
                }
                phase_ = Phase::Listening;
                return {act::EnterPowerState{RadioMode::Listening},
                        act::ArmTimer{TimerId::PollTimeout,
                                      t.now + ctx.flex.wake_lead + ctx.uwb_airtime + ctx.response_guard}};
            },
            [&](const ev::Rx& rx) -> Actions {
                const auto& f = rx.frame;
                if (phase_ != Phase::Listening || !holds<msg::FlexInit>(f.kind) || f.sender != initiator_) return {};
                phase_ = Phase::RespondScheduled;
                round_ = f.round;
                init_rx_ = f.local_timestamp;
                return {act::CancelTimer{TimerId::PollTimeout},
                        act::BeginActivity{PowerState::Localization, EnergyRole::Anchor, init_rx_, round_},
                        act::EnterPowerState{RadioMode::Processing},
                        act::ArmTimer{TimerId::Respond, init_rx_ + ctx.schedule.delta_t(slot_)}};
            },
            [&](const ev::TimerFired& t) -> Actions {
                switch (t.id) {
                    case TimerId::Respond:
                        if (phase_ != Phase::RespondScheduled) return {};
                        phase_ = Phase::Responding;
                        return {act::EnterPowerState{RadioMode::Transmitting},
                                act::StartTx{msg::FlexResponse{slot_, position_, fixed_address(initiator_)}, t.t_local,
                                             fixed_address(id_), round_}};
                    case TimerId::PollTimeout:
                        if (phase_ != Phase::Listening) return {};
                        phase_ = Phase::Sleep;
                        return {act::EnterPowerState{RadioMode::Sleep}};
                    case TimerId::Rest:
                        if (phase_ != Phase::Done) return {};
                        phase_ = Phase::Sleep;
                        return {act::EnterPowerState{RadioMode::Sleep}};
                    default:
                        return {};
                }
            },
            [&](const ev::TxDone& d) -> Actions {
                if (phase_ != Phase::Responding) return {};
                return rest(init_rx_, d.now, ctx);
            },
        },
        event);
}

// ---------------------------------------------------------------------------
// FlexTag
// ---------------------------------------------------------------------------

FlexTag::FlexTag(NodeId id, std::uint64_t seed) : id_(id), rng_(seed) {}

TimeDuration FlexTag::listen_window(const ProtocolContext& ctx) {
    const int last_slot = std::max(ctx.flex.cell_size - 1, 1);
    return ctx.flex.wake_lead + ctx.flex.cell_stagger * std::max(ctx.flex.n_cells - 1, 0) +
           ctx.schedule.delta_t(last_slot) + ctx.uwb_airtime + ctx.response_guard;
}

Actions FlexTag::start(const ProtocolContext&) {
    phase_ = Phase::Sleep;
    return {act::EnterPowerState{RadioMode::Sleep}};
}

Actions FlexTag::advance(const ProtocolEvent& event, const ProtocolContext& ctx) {
    return std::visit(
        overloaded{
            [&](const ev::Trigger& t) -> Actions {
                if (phase_ != Phase::Sleep) {
                    LocalizationOutcome o;
                    o.node = id_;
                    o.mode = OutcomeMode::FlexTdoa;
                    o.failure = FailureReason::Busy;
                    return {act::EmitOutcome{std::move(o)}};
                }
                phase_ = Phase::Listening;
                t_listen_ = t.now;
                frames_.clear();
                pending_ = LocalizationOutcome{};
                pending_.node = id_;
                pending_.mode = OutcomeMode::FlexTdoa;
                return {act::EnterPowerState{RadioMode::Listening},
                        act::ArmTimer{TimerId::WindowEnd, t.now + listen_window(ctx)}};
            },
            [&](const ev::Rx& rx) -> Actions {
                const auto& f = rx.frame;
                if (phase_ == Phase::Listening && (holds<msg::FlexInit>(f.kind) || holds<msg::FlexResponse>(f.kind))) {
                    frames_.push_back(f);
                }
                return {};
            },
            [&](const ev::TimerFired& t) -> Actions {
                if (t.id == TimerId::WindowEnd && phase_ == Phase::Listening) {
                    // Group by initiator; the cell round heard best wins, ties
                    // to the earliest initiator frame.
                    std::map<std::uint64_t, std::vector<const RxEvent*>> groups;
                    std::map<std::uint64_t, const RxEvent*> inits;
                    for (const auto& f : frames_) {
                        if (holds<msg::FlexInit>(f.kind)) {
                            inits[f.source.value] = &f;
                        } else {
                            groups[std::get<msg::FlexResponse>(f.kind).in_reply_to.value].push_back(&f);
                        }
                    }
                    const RxEvent* best_init = nullptr;
                    std::size_t best_n = 0;
                    for (const auto& [addr, init] : inits) {
                        const std::size_t n = 1 + groups[addr].size();
                        if (n > best_n || (n == best_n && init->local_timestamp < best_init->local_timestamp)) {
                            best_n = n;
                            best_init = init;
                        }
                    }
                    const std::uint64_t round = best_init ? best_init->round : 0;
                    pending_.round = round;
                    pending_.n_responses_used = static_cast<int>(best_n);
                    Actions out{act::BeginActivity{PowerState::Localization, EnergyRole::PassiveTag, t_listen_, round}};
                    const std::size_t need =
                        std::max<std::size_t>(static_cast<std::size_t>(ctx.min_responses), solver_minimum(ctx) + 1);
                    if (best_n < need) {
                        pending_.failure = FailureReason::InsufficientResponses;
                    } else {
                        const auto& init_msg = std::get<msg::FlexInit>(best_init->kind);
                        std::vector<TdoaMeasurement> ms;
                        TdoaMeasurement ref;
                        ref.anchor_position = init_msg.anchor_position;
                        ref.initiator_position = init_msg.anchor_position;
                        ref.cfo = best_init->cfo;
                        ref.t_arrival_local = best_init->local_timestamp;
                        ref.reference = true;
                        ms.push_back(ref);
                        for (const RxEvent* f : groups[best_init->source.value]) {
                            const auto& r = std::get<msg::FlexResponse>(f->kind);
                            TdoaMeasurement m;
                            m.anchor_index = r.anchor_index;
                            m.anchor_position = r.anchor_position;
                            m.initiator_position = init_msg.anchor_position;
                            m.delta_t = ctx.schedule.delta_t(r.anchor_index).to_seconds();
                            m.cfo = f->cfo;
                            m.t_arrival_local = f->local_timestamp;
                            ms.push_back(m);
                        }
                        pending_.tdoa = ms;
                        try {
                            const auto sol = particle_filter_solve(ms, ctx.solver, rng_);
                            pending_.estimate = sol.position;
                            pending_.refined = sol.refined;
                        } catch (const Error& e) {
                            pending_.failure = reason_of(e);
                        }
                    }
                    if (pending_.failure) {
                        pending_.latency = rounded(picos_between(t.t_local, t_listen_));
                        out.push_back(act::EmitOutcome{pending_});
                        phase_ = Phase::Done;
                        out.push_back(act::EnterPowerState{RadioMode::Done});
                        out.push_back(act::ArmTimer{
                            TimerId::Rest,
                            later(t.t_local, t_listen_ + block_length(EnergyRole::PassiveTag, ctx.flex.cell_size, ctx))});
                        return out;
                    }
                    phase_ = Phase::Solving;
                    out.push_back(act::EnterPowerState{RadioMode::Processing});
                    out.push_back(act::ArmTimer{TimerId::SolveDone, t.t_local + ctx.solve_time});
                    return out;
                }
                if (t.id == TimerId::SolveDone && phase_ == Phase::Solving) {
                    pending_.latency = rounded(picos_between(t.t_local, t_listen_));
                    phase_ = Phase::Done;
                    return {act::EmitOutcome{pending_}, act::EnterPowerState{RadioMode::Done},
                            act::ArmTimer{TimerId::Rest,
                                          later(t.t_local, t_listen_ + block_length(EnergyRole::PassiveTag,
                                                                                    ctx.flex.cell_size, ctx))}};
                }
                if (t.id == TimerId::Rest && phase_ == Phase::Done) {
                    phase_ = Phase::Sleep;
                    return {act::EnterPowerState{RadioMode::Sleep}};
                }
                return {};
            },
            [&](const ev::TxDone&) -> Actions { return {}; },
        },
        event);
}

// ---------------------------------------------------------------------------

TimeDuration end_to_end_latency(Scheme scheme, int n, const ProtocolContext& ctx) {
    if (n < 1) throw Error(Errc::InvalidArgument, "anchor count must be >= 1");
    const TimeDuration ranging = ctx.schedule.delta_t(n) + ctx.uwb_airtime + ctx.response_guard;
    switch (scheme) {
        case Scheme::WakeLoc:
            return ctx.wuc_airtime + ctx.schedule.wakeup_settle + ranging + ctx.solve_time + ctx.uwb_airtime;
        case Scheme::ApTwr:
            return ranging + ctx.solve_time + ctx.uwb_airtime;
        case Scheme::FlexTdoa: {
            const int last_slot = std::max(n - 1, 1);
            return ctx.flex.wake_lead + ctx.flex.cell_stagger * std::max(ctx.flex.n_cells - 1, 0) +
                   ctx.schedule.delta_t(last_slot) + ctx.uwb_airtime + ctx.response_guard + ctx.solve_time;
        }
    }
    return {};
}

}  // namespace wakeloc
