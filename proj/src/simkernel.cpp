#include "wakeloc/simkernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include <json.hpp>

namespace wakeloc {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t node, StreamPurpose purpose) {
    return std::mt19937_64(stream_seed(seed, node, static_cast<std::uint64_t>(purpose)));
}

TimeDuration block_length(EnergyRole role, int n, const ProtocolContext& ctx) {
    return TimeDuration::from_seconds(localization_duration(role, n, ctx.energy));
}

// Longest stretch of one FlexTDOA cycle any node is busy for, measured from
// the cycle start.
TimeDuration flex_cycle_span(const ProtocolContext& ctx) {
    const int n = ctx.flex.cell_size;
    const TimeDuration last_cell = ctx.flex.cell_stagger * std::max(ctx.flex.n_cells - 1, 0);
    const TimeDuration tag = std::max(end_to_end_latency(Scheme::FlexTdoa, n, ctx),
                                      block_length(EnergyRole::PassiveTag, n, ctx));
    const TimeDuration anchor = ctx.flex.wake_lead + last_cell + block_length(EnergyRole::Anchor, n, ctx);
    return std::max(tag, anchor);
}

bool segment_hits_rect(const Position3& a, const Position3& b, const Rect& r) {
    // Liang-Barsky clip of the horizontal projection.
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
        if (t0 > t1) return false;
    }
    return true;
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
    if (replication == 0) return seed;
    return stream_seed(seed, replication, static_cast<std::uint64_t>(StreamPurpose::Replication));
}

}  // namespace

// ---------------------------------------------------------------------------
// Deployment and triggers
// ---------------------------------------------------------------------------

Deployment make_deployment(const ScenarioConfig& config, const Layout& layout, std::span<const Position3> tags,
                           std::uint64_t replication) {
    Deployment d;
    d.layout = layout;
    d.seed = replication_seed(config.seed, replication);
    d.n_anchors = layout.anchors.size();
    if (d.n_anchors == 0) throw Error(Errc::ValidationError, "layout has zero anchors");

    std::vector<int> slots(d.n_anchors, 0);
    if (config.scheme == Scheme::FlexTdoa) {
        d.cells = partition_cells(layout.anchors, config.protocol.flex_cell_size, config.channel.uwb_range);
        for (const auto& cell : d.cells) {
            for (std::size_t k = 0; k < cell.members.size(); ++k) slots[cell.members[k]] = static_cast<int>(k);
        }
        std::vector<int> responder_slots{std::max(config.protocol.flex_cell_size - 1, 1)};
        d.ctx = make_protocol_context(config, layout, responder_slots, static_cast<int>(d.cells.size()));
        if (flex_cycle_span(d.ctx) >= d.ctx.flex.period) {
            const std::string msg = "protocol.flextdoa.period_s too short for " + std::to_string(d.cells.size()) +
                                    " cells (needs > " + std::to_string(flex_cycle_span(d.ctx).to_seconds()) + " s)";
            throw Error(Errc::ValidationError, msg, {msg});
        }
    } else {
        const double select = config.protocol.aptwr_select_range_m.value_or(config.channel.wuc_range);
        slots = assign_slots(layout.anchors, 2.0 * std::max(config.channel.wuc_range, select));
        d.ctx = make_protocol_context(config, layout, slots, 0);
    }

    const auto max_offset = TimeDuration::from_seconds(config.clock.max_offset_s);
    for (std::size_t i = 0; i < d.n_anchors; ++i) {
        auto rng = stream(d.seed, i, StreamPurpose::Clock);
        NodeInfo n;
        n.id = NodeId{static_cast<std::uint32_t>(i)};
        n.role = NodeRole::Anchor;
        n.position = layout.anchors[i];
        n.clock = sample_clock(rng, config.clock.max_skew_ppm, max_offset, config.clock.drift_rate);
        n.slot = slots[i];
        d.nodes.push_back(n);
    }
    for (std::size_t t = 0; t < tags.size(); ++t) {
        const std::size_t i = d.n_anchors + t;
        auto rng = stream(d.seed, i, StreamPurpose::Clock);
        NodeInfo n;
        n.id = NodeId{static_cast<std::uint32_t>(i)};
        n.role = NodeRole::Tag;
        n.position = tags[t];
        if (!config.clock.ideal_tags) {
            n.clock = sample_clock(rng, config.clock.max_skew_ppm, max_offset, config.clock.drift_rate);
        }
        d.nodes.push_back(n);
    }
    return d;
}

TriggerPlan schedule_triggers(const ScenarioConfig& config, const Deployment& d) {
    TriggerPlan plan;
    const auto& loc = config.localization;
    const std::size_t n_tags = d.n_tags();
    const TimeInstant start = TimeInstant::from_seconds(loc.start_s);
    std::optional<TimeInstant> horizon;
    if (config.horizon_s) horizon = TimeInstant::from_seconds(*config.horizon_s);

    if (config.scheme == Scheme::FlexTdoa) {
        const auto& f = d.ctx.flex;
        const TimeDuration span = flex_cycle_span(d.ctx);
        const long tag_cycles = std::max(1L, std::lround(loc.period_s / f.period.to_seconds()));
        std::int64_t n_cycles = 0;
        if (horizon) {
            while (start + f.period * n_cycles + span <= *horizon) ++n_cycles;
        } else {
            n_cycles = std::max<std::int64_t>(1, static_cast<std::int64_t>(loc.rounds_per_tag.value_or(1)) * tag_cycles);
        }
        const auto n_cells = static_cast<std::uint64_t>(d.cells.size());
        for (std::int64_t k = 0; k < n_cycles; ++k) {
            const TimeInstant base = start + f.period * k;
            for (std::uint64_t c = 0; c < n_cells; ++c) {
                const std::uint64_t round = 1 + static_cast<std::uint64_t>(k) * n_cells + c;
                const TimeInstant cell_t = base + f.cell_stagger * static_cast<std::int64_t>(c);
                for (std::size_t m : d.cells[c].members) {
                    const bool init = m == d.cells[c].initiator();
                    plan.triggers.push_back({NodeId{static_cast<std::uint32_t>(m)}, init ? cell_t + f.wake_lead : cell_t,
                                             round});
                }
            }
            for (std::size_t t = 0; t < n_tags; ++t) {
                const long offset = static_cast<long>(t * static_cast<std::size_t>(tag_cycles) / n_tags);
                if ((k + offset) % tag_cycles == 0) {
                    plan.triggers.push_back({NodeId{static_cast<std::uint32_t>(d.n_anchors + t)}, base, 0});
                }
            }
        }
        plan.horizon = horizon ? *horizon : start + f.period * n_cycles;
    } else {
        auto rng = stream(d.seed, 0, StreamPurpose::Trigger);
        std::vector<std::size_t> order;
        std::optional<std::size_t> total;
        if (loc.rounds_per_tag && n_tags > 0) {
            for (int r = 0; r < *loc.rounds_per_tag; ++r) {
                for (std::size_t t = 0; t < n_tags; ++t) order.push_back(t);
            }
            std::shuffle(order.begin(), order.end(), rng);
            total = order.size();
        }
        const double mean = n_tags > 0 ? loc.period_s / static_cast<double>(n_tags) : loc.period_s;
        std::uniform_real_distribution<double> jitter(1.0 - loc.jitter, 1.0 + loc.jitter);
        std::exponential_distribution<double> expo(1.0 / mean);
        std::uniform_int_distribution<std::size_t> pick(0, n_tags > 0 ? n_tags - 1 : 0);
        double t_s = loc.start_s;
        for (std::size_t k = 0; n_tags > 0; ++k) {
            if (total && k >= *total) break;
            const TimeInstant t = TimeInstant::from_seconds(t_s);
            if (horizon && t >= *horizon) break;
            if (!total && !horizon) break;
            const std::size_t tag = total ? order[k] : pick(rng);
            plan.triggers.push_back({NodeId{static_cast<std::uint32_t>(d.n_anchors + tag)}, t, k + 1});
            switch (loc.process) {
                case TriggerProcess::Periodic: t_s += mean; break;
                case TriggerProcess::Jittered: t_s += mean * jitter(rng); break;
                case TriggerProcess::Poisson: t_s += expo(rng); break;
            }
        }
        if (horizon) {
            plan.horizon = *horizon;
        } else if (plan.triggers.empty()) {
            plan.horizon = start + TimeDuration::from_seconds(loc.period_s);
        } else {
            plan.horizon = plan.triggers.back().t + TimeDuration::from_seconds(std::max(mean, 0.2));
        }
    }
    std::stable_sort(plan.triggers.begin(), plan.triggers.end(), [](const auto& a, const auto& b) {
        return a.t != b.t ? a.t < b.t : a.node < b.node;
    });
    return plan;
}

// ---------------------------------------------------------------------------
// Ledgers
// ---------------------------------------------------------------------------

std::vector<std::pair<std::uint64_t, int>> round_sizes(std::span<const Transmission> transmissions) {
    std::map<std::uint64_t, std::set<std::uint32_t>> members;
    for (const auto& tx : transmissions) {
        if (tx.round == 0) continue;
        if (holds<msg::Response>(tx.kind) || holds<msg::FlexResponse>(tx.kind) || holds<msg::FlexInit>(tx.kind)) {
            members[tx.round].insert(tx.sender.value);
        }
    }
    std::vector<std::pair<std::uint64_t, int>> out;
    for (const auto& [round, set] : members) out.emplace_back(round, static_cast<int>(set.size()));
    return out;
}

std::vector<EnergyLedger> build_ledgers(std::span<const ActivityRecord> activities,
                                        std::span<const Transmission> transmissions, const Deployment& d,
                                        TimeInstant horizon) {
    std::map<std::uint64_t, int> sizes;
    for (const auto& [round, n] : round_sizes(transmissions)) sizes[round] = n;
    const auto& ctx = d.ctx;
    const bool always_on = ctx.scheme == Scheme::ApTwr;

    std::vector<EnergyLedger> ledgers(d.nodes.size());
    for (std::size_t i = 0; i < d.nodes.size(); ++i) {
        ledgers[i].node = d.nodes[i].id;
        ledgers[i].horizon = horizon - TimeInstant(0);
        const bool anchor = d.nodes[i].role == NodeRole::Anchor;
        ledgers[i].idle_power = anchor && always_on ? ctx.energy.aptwr_rx_idle_power : ctx.energy.sleep_power;
    }
    for (const auto& a : activities) {
        const ClockModel& clock = d.nodes.at(a.node.value).clock;
        LedgerEntry e;
        e.state = a.kind;
        e.round = a.round;
        e.start = from_local(a.t_local, clock).rounded();
        if (a.kind == PowerState::WakeUp) {
            e.end = from_local(a.t_local + ctx.wuc_airtime, clock).rounded();
            e.energy = wakeup_energy(a.role, ctx.wuc_airtime.to_seconds(), ctx.energy);
        } else {
            const auto it = sizes.find(a.round);
            const int n = std::clamp(it == sizes.end() ? 1 : it->second, 1, std::max(ctx.n_bound, 1));
            e.end = from_local(a.t_local + block_length(a.role, n, ctx), clock).rounded();
            e.energy = localization_energy(a.role, n, ctx.energy);
        }
        if (e.start < TimeInstant(0) || e.end > horizon) continue;
        ledgers[a.node.value].entries.push_back(e);
    }
    for (auto& l : ledgers) {
        std::stable_sort(l.entries.begin(), l.entries.end(), [](const auto& x, const auto& y) { return x.start < y.start; });
    }
    return ledgers;
}

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

namespace {

using Machine = std::variant<ResponderAnchor, LocalizingTag, FlexAnchor, FlexTag>;

constexpr std::size_t kTimerCount = static_cast<std::size_t>(TimerId::Rest) + 1;

struct NodeState {
    RadioMode mode = RadioMode::Sleep;
    TimeInstant mode_since;
    std::array<std::uint64_t, kTimerCount> timer_gen{};
    std::mt19937_64 channel_rng;
    std::optional<std::pair<OutcomeMode, std::uint64_t>> open_round;
};

enum class EventType { Trigger, Timer, AirStart, TxEnd, RxEnd };

struct Event {
    std::int64_t t = 0;
    std::uint64_t seq = 0;
    EventType type = EventType::Trigger;
    std::uint32_t node = 0;
    std::size_t index = 0;    // trigger, pending tx or transmission index
    std::uint64_t gen = 0;    // timer generation
    TimerId timer = TimerId::Ready;
    Timestamp t_local;        // nominal local expiry of a timer
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
};

json pos_json(const Position3& p) {
    return json::array({p.x, p.y, p.z});
}

json kind_details(const MessageKind& kind) {
    json j{{"msg", std::string(kind_name(kind))}};
    std::visit(overloaded{
                   [&](const msg::WakeUpCall&) {},
                   [&](const msg::Poll& p) { j["responders"] = p.responders; },
                   [&](const msg::Response& r) {
                       j["slot"] = r.anchor_index;
                       j["reply_s"] = r.reply_duration_local;
                   },
                   [&](const msg::FinalBroadcast& f) { j["estimate"] = pos_json(f.estimated_position); },
                   [&](const msg::FlexInit& f) { j["cycle"] = f.cycle; },
                   [&](const msg::FlexResponse& r) { j["slot"] = r.anchor_index; },
               },
               kind);
    return j;
}

class Kernel {
public:
    Kernel(const ScenarioConfig& config, const Deployment& d) : config_(config), d_(d), ctx_(d.ctx) {
        for (const auto& n : d.nodes) {
            NodeState s;
            s.channel_rng = stream(d.seed, n.id.value, StreamPurpose::Channel);
            states_.push_back(std::move(s));
            const std::uint64_t proto_seed = stream_seed(d.seed, n.id.value, static_cast<std::uint64_t>(StreamPurpose::Protocol));
            if (n.role == NodeRole::Anchor) {
                if (ctx_.scheme == Scheme::FlexTdoa) {
                    const FlexCell* cell = nullptr;
                    for (const auto& c : d.cells) {
                        if (std::find(c.members.begin(), c.members.end(), n.id.value) != c.members.end()) cell = &c;
                    }
                    machines_.emplace_back(FlexAnchor(n.id, n.slot, n.position,
                                                      NodeId{static_cast<std::uint32_t>(cell->initiator())},
                                                      static_cast<int>(cell->members.size())));
                } else {
                    machines_.emplace_back(ResponderAnchor(n.id, std::max(n.slot, 1), n.position));
                }
            } else if (ctx_.scheme == Scheme::FlexTdoa) {
                machines_.emplace_back(FlexTag(n.id, proto_seed));
            } else {
                machines_.emplace_back(LocalizingTag(n.id, proto_seed));
            }
        }
        if (config.obstacles_block_radio) {
            obstacles_ = d.layout.floor.obstacles;
            blocked_ = [this](const Position3& a, const Position3& b) {
                return std::any_of(obstacles_.begin(), obstacles_.end(),
                                   [&](const Rect& r) { return segment_hits_rect(a, b, r); });
            };
        }
        max_delay_ = TimeDuration(static_cast<std::int64_t>(
                         std::ceil(std::max(config.channel.uwb_range, config.channel.wuc_range) / kSpeedOfLight * 1e12))) +
                     TimeDuration(2);
        trace_.scheme = ctx_.scheme;
    }

    SimulationTrace run(const TriggerPlan& plan) {
        trace_.triggers = plan.triggers;
        trace_.horizon = plan.horizon;
        for (std::size_t i = 0; i < d_.nodes.size(); ++i) apply(static_cast<std::uint32_t>(i), start(i), TimeInstant(0));
        for (std::size_t i = 0; i < plan.triggers.size(); ++i) {
            Event e;
            e.t = plan.triggers[i].t.count();
            e.type = EventType::Trigger;
            e.node = plan.triggers[i].node.value;
            e.index = i;
            push(e);
        }
        std::int64_t last_t = 0;
        std::uint64_t last_seq = 0;
        while (!queue_.empty()) {
            const Event e = queue_.top();
            if (e.t >= plan.horizon.count()) break;
            queue_.pop();
            if (e.t < last_t || (e.t == last_t && e.seq < last_seq)) {
                throw Error(Errc::InvalidArgument, "event order violated");
            }
            last_t = e.t;
            last_seq = e.seq;
            ++trace_.events;
            dispatch(e);
        }
        for (std::size_t i = 0; i < states_.size(); ++i) {
            if (!states_[i].open_round) continue;
            LocalizationOutcome o;
            o.node = d_.nodes[i].id;
            o.mode = states_[i].open_round->first;
            o.round = states_[i].open_round->second;
            o.failure = FailureReason::Truncated;
            o.truth = d_.nodes[i].position;
            trace_.outcomes.push_back(std::move(o));
        }
        trace_.ledgers = build_ledgers(trace_.activities, trace_.transmissions, d_, trace_.horizon);
        return std::move(trace_);
    }

private:
    Actions start(std::size_t i) {
        return std::visit([&](auto& m) { return m.start(ctx_); }, machines_[i]);
    }

    Actions step(std::uint32_t node, const ProtocolEvent& ev) {
        return std::visit([&](auto& m) { return m.advance(ev, ctx_); }, machines_[node]);
    }

    void push(Event e) {
        e.seq = next_seq_++;
        queue_.push(e);
    }

    Timestamp local_now(std::uint32_t node, TimeInstant t) const { return to_local(Timestamp(t), d_.nodes[node].clock); }

    void record(std::int64_t t, std::uint32_t node, const char* kind, json details) {
        if (!config_.output.trace) return;
        trace_.records.push_back({t, record_seq_++, node, kind, details.dump()});
    }

    bool listening(std::uint32_t node, RadioChannel ch, const Timestamp& from) const {
        const NodeState& s = states_[node];
        const bool mode_ok = ch == RadioChannel::WakeUp ? (ctx_.scheme == Scheme::WakeLoc && s.mode == RadioMode::Sleep)
                                                        : s.mode == RadioMode::Listening;
        return mode_ok && Timestamp(s.mode_since) <= from;
    }

    void dispatch(const Event& e) {
        const TimeInstant now(e.t);
        switch (e.type) {
            case EventType::Trigger: {
                const auto& trig = trace_.triggers[e.index];
                ev::Trigger t{local_now(e.node, now), trig.round, {}};
                if (ctx_.scheme == Scheme::ApTwr) t.responders = responders_for(e.node);
                record(e.t, e.node, "trigger", {{"round", trig.round}});
                const bool tag = d_.is_tag(NodeId{e.node});
                Actions acts = step(e.node, t);
                const bool busy = std::any_of(acts.begin(), acts.end(), [](const Action& a) {
                    const auto* o = std::get_if<act::EmitOutcome>(&a);
                    return o && o->outcome.failure == FailureReason::Busy;
                });
                if (tag && !busy) {
                    const OutcomeMode mode = ctx_.scheme == Scheme::FlexTdoa ? OutcomeMode::FlexTdoa
                                             : ctx_.scheme == Scheme::ApTwr  ? OutcomeMode::ApTwr
                                                                             : OutcomeMode::Active;
                    states_[e.node].open_round = std::make_pair(mode, trig.round);
                }
                apply(e.node, std::move(acts), now);
                break;
            }
            case EventType::Timer: {
                if (states_[e.node].timer_gen[static_cast<std::size_t>(e.timer)] != e.gen) break;
                record(e.t, e.node, "timer", {{"timer", std::string(to_string(e.timer))}});
                apply(e.node, step(e.node, ev::TimerFired{e.timer, e.t_local}), now);
                break;
            }
            case EventType::AirStart: air_start(e.index, now); break;
            case EventType::TxEnd: {
                const Transmission& tx = trace_.transmissions[e.index];
                record(e.t, e.node, "tx_end", {{"tx", tx.id.value}});
                const Timestamp end_local = to_local(tx.end(), d_.nodes[e.node].clock);
                apply(e.node, step(e.node, ev::TxDone{tx.kind, end_local}), now);
                break;
            }
            case EventType::RxEnd: rx_end(e.index, e.node, now); break;
        }
    }

    std::vector<std::uint32_t> responders_for(std::uint32_t tag) const {
        const double range = config_.protocol.aptwr_select_range_m.value_or(config_.channel.wuc_range);
        std::vector<std::uint32_t> out;
        for (std::size_t i = 0; i < d_.n_anchors; ++i) {
            if (distance(d_.nodes[i].position, d_.nodes[tag].position) <= range) out.push_back(static_cast<std::uint32_t>(i));
        }
        return out;
    }

    void air_start(std::size_t pending_index, TimeInstant now) {
        Transmission tx = pending_tx_[pending_index];
        tx.id = TxId{trace_.transmissions.size()};
        const std::size_t idx = trace_.transmissions.size();
        trace_.transmissions.push_back(tx);
        record(now.count(), tx.sender.value, "tx_start",
               [&] {
                   json j = kind_details(tx.kind);
                   j["tx"] = tx.id.value;
                   j["round"] = tx.round;
                   return j;
               }());

        // Drop transmissions that can no longer overlap anything new.
        const TimeDuration keep = ctx_.wuc_airtime + ctx_.uwb_airtime + max_delay_ * 2;
        recent_.erase(std::remove_if(recent_.begin(), recent_.end(),
                                     [&](std::size_t k) { return trace_.transmissions[k].t_air_end() + keep < now; }),
                      recent_.end());
        recent_.push_back(idx);

        for (std::size_t r = 0; r < d_.nodes.size(); ++r) {
            if (r == tx.sender.value) continue;
            if (!in_range(tx, d_.nodes[r].position, config_.channel, blocked_)) continue;
            const ArrivalWindow w = arrival_window(tx, d_.nodes[r].position);
            Event e;
            e.t = w.end.ps + (w.end.frac_ps > 0.0 ? 1 : 0);
            e.type = EventType::RxEnd;
            e.node = static_cast<std::uint32_t>(r);
            e.index = idx;
            push(e);
        }
        Event end;
        end.t = tx.t_air_end().count();
        end.type = EventType::TxEnd;
        end.node = tx.sender.value;
        end.index = idx;
        push(end);
    }

    void rx_end(std::size_t idx, std::uint32_t node, TimeInstant now) {
        const Transmission& tx = trace_.transmissions[idx];
        const Position3& pos = d_.nodes[node].position;
        const ArrivalWindow w = arrival_window(tx, pos);
        if (!listening(node, tx.channel, w.start)) {
            record(now.count(), node, "rx_miss", {{"tx", tx.id.value}});
            return;
        }
        std::vector<Transmission> candidates{tx};
        for (std::size_t k : recent_) {
            if (k == idx) continue;
            const Transmission& other = trace_.transmissions[k];
            if (other.channel != tx.channel || other.sender.value == node) continue;
            if (!in_range(other, pos, config_.channel, blocked_)) continue;
            const ArrivalWindow o = arrival_window(other, pos);
            if (o.start < w.end && w.start < o.end) candidates.push_back(other);
        }
        const Receiver receiver{d_.nodes[node].id, pos, d_.nodes[node].clock};
        auto heard = arbitrate_receptions(receiver, candidates, config_.channel, states_[node].channel_rng, blocked_);
        const auto it = std::find_if(heard.begin(), heard.end(), [&](const RxEvent& r) { return r.tx == tx.id; });
        if (it == heard.end()) {
            record(now.count(), node, "rx_collision", {{"tx", tx.id.value}});
            return;
        }
        RxEvent rx = *it;
        trace_.receptions.push_back(rx);
        record(now.count(), node, "rx",
               {{"tx", rx.tx.value},
                {"sender", rx.sender.value},
                {"t_local_ps", rx.local_timestamp.ps},
                {"t_frac_ps", rx.local_timestamp.frac_ps},
                {"cfo", rx.cfo}});
        apply(node, step(node, ev::Rx{std::move(rx), local_now(node, now)}), now);
    }

    void apply(std::uint32_t node, Actions actions, TimeInstant now) {
        const ClockModel& clock = d_.nodes[node].clock;
        NodeState& s = states_[node];
        for (auto& a : actions) {
            std::visit(
                overloaded{
                    [&](act::StartTx& tx) {
                        Transmission t;
                        t.sender = NodeId{node};
                        t.source = tx.source;
                        t.kind = std::move(tx.kind);
                        t.channel = channel_of(t.kind);
                        t.start = from_local(tx.t_local, clock);
                        if (t.start.rounded() < now) t.start = Timestamp(now);
                        t.duration = airtime(t.kind, config_.channel);
                        t.origin = d_.nodes[node].position;
                        t.sender_clock = clock;
                        t.round = tx.round;
                        pending_tx_.push_back(std::move(t));
                        Event e;
                        e.t = pending_tx_.back().start.rounded().count();
                        e.type = EventType::AirStart;
                        e.node = node;
                        e.index = pending_tx_.size() - 1;
                        push(e);
                    },
                    [&](act::ArmTimer& t) {
                        auto& gen = s.timer_gen[static_cast<std::size_t>(t.id)];
                        ++gen;
                        Event e;
                        e.t = std::max(from_local(t.t_local, clock).rounded(), now).count();
                        e.type = EventType::Timer;
                        e.node = node;
                        e.gen = gen;
                        e.timer = t.id;
                        e.t_local = t.t_local;
                        push(e);
                    },
                    [&](act::CancelTimer& t) { ++s.timer_gen[static_cast<std::size_t>(t.id)]; },
                    [&](act::EnterPowerState& p) {
                        if (p.mode == s.mode) return;
                        s.mode = p.mode;
                        s.mode_since = now;
                        record(now.count(), node, "mode", {{"mode", std::string(to_string(p.mode))}});
                    },
                    [&](act::BeginActivity& b) {
                        trace_.activities.push_back({NodeId{node}, b.kind, b.role, b.t_local, b.round});
                        if (b.kind == PowerState::WakeUp && b.role == EnergyRole::PassiveTag) {
                            s.open_round = std::make_pair(OutcomeMode::Passive, b.round);
                        }
                        record(now.count(), node, "activity",
                               {{"state", std::string(to_string(b.kind))},
                                {"role", std::string(to_string(b.role))},
                                {"round", b.round}});
                    },
                    [&](act::EmitOutcome& o) {
                        o.outcome.truth = d_.nodes[node].position;
                        if (o.outcome.failure != FailureReason::Busy) s.open_round.reset();
                        json j{{"mode", std::string(to_string(o.outcome.mode))}, {"round", o.outcome.round}};
                        if (o.outcome.estimate) j["estimate"] = pos_json(*o.outcome.estimate);
                        if (o.outcome.failure) j["failure"] = std::string(to_string(*o.outcome.failure));
                        record(now.count(), node, "outcome", std::move(j));
                        trace_.outcomes.push_back(std::move(o.outcome));
                    },
                },
                a);
        }
    }

    const ScenarioConfig& config_;
    const Deployment& d_;
    const ProtocolContext& ctx_;
    std::vector<Machine> machines_;
    std::vector<NodeState> states_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t record_seq_ = 0;
    std::vector<Transmission> pending_tx_;
    std::vector<std::size_t> recent_;
    std::vector<Rect> obstacles_;
    LinkBlocked blocked_;
    TimeDuration max_delay_;
    SimulationTrace trace_;
};

}  // namespace

SimulationTrace run(const ScenarioConfig& config, const Deployment& deployment) {
    return run(config, deployment, schedule_triggers(config, deployment));
}

SimulationTrace run(const ScenarioConfig& config, const Deployment& deployment, const TriggerPlan& plan) {
    Kernel k(config, deployment);
    return k.run(plan);
}

SimulationTrace run(const ScenarioConfig& config) {
    validate(config);
    const Layout layout = generate_layout(config.layout, config.seed, config.channel.uwb_range);
    std::vector<Position3> tags;
    if (config.tags.positions) {
        tags = *config.tags.positions;
    } else {
        tags = sample_placements(layout, config.tags.count, 1, config.seed, config.tags.height_m).front();
    }
    const Deployment d = make_deployment(config, layout, tags, 0);
    return run(config, d);
}

std::string trace_ndjson(const SimulationTrace& trace) {
    std::string out;
    for (const auto& r : trace.records) {
        out += "{\"t_ps\":" + std::to_string(r.t_ps) + ",\"seq\":" + std::to_string(r.seq) +
               ",\"node\":" + std::to_string(r.node) + ",\"kind\":\"" + r.kind + "\",\"details\":" + r.details + "}\n";
    }
    return out;
}

}  // namespace wakeloc
