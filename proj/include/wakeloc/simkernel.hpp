#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wakeloc/channel.hpp"
#include "wakeloc/energy.hpp"
#include "wakeloc/protocols.hpp"
#include "wakeloc/scenario.hpp"

namespace wakeloc {

struct NodeInfo {
    NodeId id;
    NodeRole role = NodeRole::Anchor;
    Position3 position;
    ClockModel clock;
    int slot = 0;  // response slot, 0 for tags and FlexTDOA initiators
};

// Everything fixed for one replication: nodes, slots, cells, derived context.
// Anchors take ids 0..A-1, tags A..A+T-1.
struct Deployment {
    Layout layout;
    std::vector<NodeInfo> nodes;
    std::vector<FlexCell> cells;
    ProtocolContext ctx;
    std::size_t n_anchors = 0;
    std::uint64_t seed = 0;  // replication seed

    std::size_t n_tags() const { return nodes.size() - n_anchors; }
    bool is_tag(NodeId id) const { return id.value >= n_anchors; }
};

// Throws ValidationError when FlexTDOA cell rounds do not fit in one period.
Deployment make_deployment(const ScenarioConfig& config, const Layout& layout, std::span<const Position3> tags,
                           std::uint64_t replication = 0);

struct ScheduledTrigger {
    NodeId node;
    TimeInstant t;
    std::uint64_t round = 0;  // 0 for FlexTDOA tag wake-ups

    friend bool operator==(const ScheduledTrigger&, const ScheduledTrigger&) = default;
};

struct TriggerPlan {
    std::vector<ScheduledTrigger> triggers;  // sorted by (t, node)
    TimeInstant horizon;
};

TriggerPlan schedule_triggers(const ScenarioConfig& config, const Deployment& deployment);

// An energy block opened by a node; length and cost are settled by the ledger
// builder from the round's anchor count.
struct ActivityRecord {
    NodeId node;
    PowerState kind = PowerState::Localization;
    EnergyRole role = EnergyRole::Anchor;
    Timestamp t_local;
    std::uint64_t round = 0;
};

struct TraceRecord {
    std::int64_t t_ps = 0;
    std::uint64_t seq = 0;
    std::uint32_t node = 0;
    std::string kind;
    std::string details;  // JSON object
};

struct SimulationTrace {
    Scheme scheme = Scheme::WakeLoc;
    TimeInstant horizon;
    std::vector<ScheduledTrigger> triggers;
    std::vector<Transmission> transmissions;
    std::vector<RxEvent> receptions;
    std::vector<LocalizationOutcome> outcomes;
    std::vector<ActivityRecord> activities;
    std::vector<EnergyLedger> ledgers;  // one per node, id order
    std::vector<TraceRecord> records;   // only with output.trace
    std::uint64_t events = 0;
};

// Number of anchors taking part in each round, derived from its frames.
std::vector<std::pair<std::uint64_t, int>> round_sizes(std::span<const Transmission> transmissions);

// Rebuilds every node's ledger from the activity records and the
// transmissions; blocks ending after the horizon are dropped.
std::vector<EnergyLedger> build_ledgers(std::span<const ActivityRecord> activities,
                                        std::span<const Transmission> transmissions, const Deployment& deployment,
                                        TimeInstant horizon);

SimulationTrace run(const ScenarioConfig& config, const Deployment& deployment);
// Runs a hand-made trigger plan instead of the configured one.
SimulationTrace run(const ScenarioConfig& config, const Deployment& deployment, const TriggerPlan& plan);
// Layout from the config, placement 0.
SimulationTrace run(const ScenarioConfig& config);

// One JSON object per line: t_ps, seq, node, kind, details.
std::string trace_ndjson(const SimulationTrace& trace);

}  // namespace wakeloc
