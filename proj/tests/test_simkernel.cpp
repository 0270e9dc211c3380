#include <gtest/gtest.h>

#include <map>
#include <set>

#include "wakeloc/error.hpp"
#include "wakeloc/simkernel.hpp"

using namespace wakeloc;

namespace {

ScenarioConfig single_cell(Scheme scheme, std::vector<Position3> tags) {
    ScenarioConfig c;
    c.scheme = scheme;
    ExplicitLayout layout;
    layout.anchors = {{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}, {6, 6, 2.5}};
    layout.area = Rect{0, 0, 12, 12};
    c.layout.kind = layout;
    c.tags.count = static_cast<int>(tags.size());
    c.tags.positions = std::move(tags);
    c.solver.n_particles = 2000;
    c.localization.period_s = 1.0;
    c.localization.rounds_per_tag = 1;
    return c;
}

ScenarioConfig noiseless(ScenarioConfig c) {
    c.channel.toa_noise_sigma = 0.0;
    c.clock.max_skew_ppm = 0.0;
    c.clock.max_offset_s = 0.0;
    return c;
}

Deployment deploy(const ScenarioConfig& c) {
    const Layout layout = generate_layout(c.layout, c.seed, c.channel.uwb_range);
    return make_deployment(c, layout, *c.tags.positions, 0);
}

std::map<std::string, int> frame_counts(const SimulationTrace& t) {
    std::map<std::string, int> n;
    for (const auto& tx : t.transmissions) ++n[std::string(kind_name(tx.kind))];
    return n;
}

}  // namespace

TEST(Kernel, NoTagsIsPureSleep) {
    ScenarioConfig c = single_cell(Scheme::WakeLoc, {});
    c.horizon_s = 3600.0;
    const auto t = run(c);
    EXPECT_TRUE(t.transmissions.empty());
    EXPECT_TRUE(t.outcomes.empty());
    ASSERT_EQ(t.ledgers.size(), 5u);
    for (const auto& l : t.ledgers) {
        EXPECT_TRUE(l.entries.empty());
        EXPECT_DOUBLE_EQ(average_power(l), 12.05e-6);
    }
}

TEST(Kernel, SingleWakeLocRoundFrameCount) {
    const ScenarioConfig c = noiseless(single_cell(Scheme::WakeLoc, {{4, 5, 1}}));
    const auto t = run(c);
    const auto n = frame_counts(t);
    EXPECT_EQ(n.at("wuc"), 1);
    EXPECT_EQ(n.at("poll"), 1);
    EXPECT_EQ(n.at("response"), 5);
    EXPECT_EQ(n.at("final"), 1);
    ASSERT_EQ(t.outcomes.size(), 1u);
    EXPECT_TRUE(t.outcomes[0].success());
    EXPECT_EQ(t.outcomes[0].n_responses_used, 5);
    EXPECT_LT(distance(*t.outcomes[0].estimate, {4, 5, 1}), 1e-4);
}

TEST(Kernel, CollisionFreeAnchorEnergyMatchesModel) {
    const ScenarioConfig c = noiseless(single_cell(Scheme::WakeLoc, {{4, 5, 1}}));
    const auto t = run(c);
    const double expected = wakeup_energy(EnergyRole::Anchor, 0.055) + localization_energy(EnergyRole::Anchor, 5);
    for (std::size_t a = 0; a < 5; ++a) EXPECT_NEAR(t.ledgers[a].event_energy(), expected, 1e-18);
    const double tag = wakeup_energy(EnergyRole::ActiveTag, 0.055) + localization_energy(EnergyRole::ActiveTag, 5);
    EXPECT_NEAR(t.ledgers[5].event_energy(), tag, 1e-18);
}

TEST(Kernel, SimultaneousTriggersCollide) {
    const ScenarioConfig c = noiseless(single_cell(Scheme::WakeLoc, {{3, 3, 1}, {9, 9, 1}}));
    const Deployment d = deploy(c);
    TriggerPlan plan;
    plan.triggers = {{NodeId{5}, TimeInstant::from_seconds(0.1), 1}, {NodeId{6}, TimeInstant::from_seconds(0.1), 2}};
    plan.horizon = TimeInstant::from_seconds(1.0);
    const auto t = run(c, d, plan);
    std::set<std::uint32_t> failed;
    for (const auto& o : t.outcomes) {
        if (o.mode == OutcomeMode::Active && !o.success()) failed.insert(o.node.value);
    }
    EXPECT_EQ(failed, (std::set<std::uint32_t>{5, 6}));
}

TEST(Kernel, TwentyRoundsPerTag) {
    ScenarioConfig c = single_cell(Scheme::WakeLoc, {});
    c.tags.positions.reset();
    c.tags.count = 5;
    c.localization.period_s = 5.0;
    c.localization.rounds_per_tag = 20;
    const auto t = run(c);
    EXPECT_EQ(t.triggers.size(), 100u);
    std::map<std::uint32_t, int> per_tag;
    std::set<std::uint64_t> rounds;
    for (const auto& tr : t.triggers) {
        ++per_tag[tr.node.value];
        rounds.insert(tr.round);
    }
    EXPECT_EQ(rounds.size(), 100u);
    for (const auto& [_, k] : per_tag) EXPECT_EQ(k, 20);
    int active = 0;
    for (const auto& o : t.outcomes) active += o.mode == OutcomeMode::Active;
    EXPECT_EQ(active, 100);
}

TEST(Kernel, FlexInitiatorTriggers) {
    ScenarioConfig c = single_cell(Scheme::FlexTdoa, {{4, 5, 1}});
    c.protocol.flex_period_s = 1.0;
    c.localization.start_s = 0.0;
    c.horizon_s = 10.0;
    const Deployment d = deploy(c);
    const auto plan = schedule_triggers(c, d);
    const std::size_t init = d.cells.at(0).initiator();
    std::vector<TimeInstant> times;
    for (const auto& tr : plan.triggers) {
        if (tr.node.value == init) times.push_back(tr.t);
    }
    ASSERT_EQ(times.size(), 10u);
    for (std::size_t k = 1; k < times.size(); ++k) EXPECT_EQ(times[k] - times[k - 1], TimeDuration::seconds(1));
}

TEST(Kernel, DeterministicAcrossRuns) {
    ScenarioConfig c = single_cell(Scheme::WakeLoc, {});
    c.tags.positions.reset();
    c.tags.count = 4;
    c.localization.rounds_per_tag = 5;
    c.output.trace = true;
    const auto a = run(c);
    const auto b = run(c);
    EXPECT_EQ(a.triggers, b.triggers);
    EXPECT_EQ(trace_ndjson(a), trace_ndjson(b));
    EXPECT_EQ(a.ledgers, b.ledgers);
    c.seed = 2;
    EXPECT_NE(run(c).triggers, a.triggers);
}

TEST(Kernel, EventOrderIsMonotonic) {
    ScenarioConfig c = single_cell(Scheme::ApTwr, {});
    c.tags.positions.reset();
    c.tags.count = 10;
    c.localization.rounds_per_tag = 3;
    c.output.trace = true;
    const auto t = run(c);
    ASSERT_FALSE(t.records.empty());
    for (std::size_t i = 1; i < t.records.size(); ++i) {
        EXPECT_LE(t.records[i - 1].t_ps, t.records[i].t_ps);
        EXPECT_LT(t.records[i - 1].seq, t.records[i].seq);
    }
}

TEST(Kernel, LedgersReplayFromTrace) {
    for (Scheme s : {Scheme::WakeLoc, Scheme::FlexTdoa, Scheme::ApTwr}) {
        ScenarioConfig c = single_cell(s, {});
        c.tags.positions.reset();
        c.tags.count = 6;
        c.localization.rounds_per_tag = 4;
        const Layout layout = generate_layout(c.layout, c.seed, c.channel.uwb_range);
        const auto tags = sample_placements(layout, 6, 1, c.seed, 1.0).front();
        const Deployment d = make_deployment(c, layout, tags, 0);
        const auto t = run(c, d);
        EXPECT_EQ(build_ledgers(t.activities, t.transmissions, d, t.horizon), t.ledgers) << to_string(s);
        for (const auto& l : t.ledgers) EXPECT_GE(average_power(l), 12.05e-6 * (1 - 1e-12));
    }
}

TEST(Kernel, AnchorsOnlyTransmitWhenWokenOrScheduled) {
    ScenarioConfig c = single_cell(Scheme::WakeLoc, {});
    c.tags.positions.reset();
    c.tags.count = 5;
    c.localization.rounds_per_tag = 5;
    const auto t = run(c);
    std::set<std::pair<std::uint32_t, std::uint64_t>> woken;
    for (const auto& rx : t.receptions) {
        if (holds<msg::WakeUpCall>(rx.kind)) woken.insert({rx.receiver.value, rx.round});
    }
    for (const auto& tx : t.transmissions) {
        if (tx.sender.value < 5) EXPECT_TRUE(woken.count({tx.sender.value, tx.round}));
    }
}

TEST(Kernel, FlexTagsArePassive) {
    ScenarioConfig one = noiseless(single_cell(Scheme::FlexTdoa, {{4, 5, 1}}));
    one.channel.toa_noise_sigma = 0.1e-9;
    one.protocol.flex_period_s = 0.1;
    one.localization.period_s = 0.1;
    one.localization.rounds_per_tag = 5;
    ScenarioConfig many = one;
    std::vector<Position3> tags{{4, 5, 1}};
    for (int i = 0; i < 9; ++i) tags.push_back({1.0 + i, 10.0 - i, 1.0});
    many.tags.count = static_cast<int>(tags.size());
    many.tags.positions = tags;
    const auto a = run(one);
    const auto b = run(many);
    std::vector<LocalizationOutcome> first_tag;
    for (const auto& o : b.outcomes) {
        if (o.node.value == 5) first_tag.push_back(o);
    }
    ASSERT_EQ(a.outcomes.size(), first_tag.size());
    for (std::size_t i = 0; i < first_tag.size(); ++i) {
        EXPECT_EQ(a.outcomes[i].tdoa, first_tag[i].tdoa);
        EXPECT_EQ(a.outcomes[i].estimate, first_tag[i].estimate);
    }
    for (const auto& tx : b.transmissions) EXPECT_LT(tx.sender.value, 5u);
}

TEST(Kernel, FlexPeriodTooShortForCells) {
    ScenarioConfig c = single_cell(Scheme::FlexTdoa, {{4, 5, 1}});
    c.protocol.flex_period_s = 0.06;
    c.protocol.flex_cell_stagger_s = 0.05;
    c.protocol.flex_cell_size = 2;
    const Layout layout = generate_layout(c.layout, c.seed, c.channel.uwb_range);
    try {
        make_deployment(c, layout, *c.tags.positions, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ValidationError);
    }
}

TEST(Kernel, TruncatedAtHorizon) {
    ScenarioConfig c = noiseless(single_cell(Scheme::WakeLoc, {{4, 5, 1}}));
    const Deployment d = deploy(c);
    TriggerPlan plan;
    plan.triggers = {{NodeId{5}, TimeInstant::from_seconds(0.1), 1}};
    plan.horizon = TimeInstant::from_seconds(0.12);
    const auto t = run(c, d, plan);
    ASSERT_EQ(t.outcomes.size(), 1u);
    EXPECT_EQ(t.outcomes[0].failure, FailureReason::Truncated);
}

TEST(Kernel, NdjsonShape) {
    ScenarioConfig c = noiseless(single_cell(Scheme::WakeLoc, {{4, 5, 1}}));
    c.output.trace = true;
    const auto text = trace_ndjson(run(c));
    ASSERT_FALSE(text.empty());
    const auto first = text.substr(0, text.find('\n'));
    EXPECT_EQ(first.rfind("{\"t_ps\":", 0), 0u);
    EXPECT_NE(text.find("\"kind\":\"outcome\""), std::string::npos);
    EXPECT_NE(text.find("\"kind\":\"tx_start\""), std::string::npos);
}
