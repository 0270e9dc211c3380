#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "wakeloc/error.hpp"
#include "wakeloc/scenario.hpp"

using namespace wakeloc;

namespace {

Error load_error(const std::string& text) {
    try {
        load_config(text);
    } catch (const Error& e) {
        return e;
    }
    return Error(Errc::InvalidArgument, "no error");
}

bool mentions(const Error& e, const std::string& needle) {
    if (std::string(e.what()).find(needle) != std::string::npos) return true;
    return std::any_of(e.details().begin(), e.details().end(),
                       [&](const std::string& d) { return d.find(needle) != std::string::npos; });
}

ScenarioConfig round_trip_config() {
    ScenarioConfig c;
    c.scheme = Scheme::FlexTdoa;
    c.seed = 0xFFFF'FFFF'FFFF'FFF0ULL;
    c.horizon_s = 12.5;
    c.channel.toa_noise_sigma = 0.2e-9;
    c.clock.ideal_tags = true;
    c.solver.box = Box{{-1, -2, 0}, {10, 20, 3}};
    c.solver.dimension = SolveDimension::ThreeD;
    c.protocol.aptwr_select_range_m = 15.0;
    c.protocol.flex_period_s = 0.1;
    ExplicitLayout layout;
    layout.anchors = {{0, 0, 2}, {10, 0, 2.5}, {0, 10, 3}};
    layout.area = Rect{0, 0, 10, 10};
    c.layout.kind = layout;
    c.layout.obstacles = std::vector<Rect>{{2, 2, 3, 3}};
    c.tags.count = 2;
    c.tags.positions = std::vector<Position3>{{1, 1, 1}, {2, 2, 1}};
    c.localization.rounds_per_tag.reset();
    c.localization.process = TriggerProcess::Poisson;
    c.output.trace = true;
    c.sweep.periods_s = {0.06, 1.0};
    c.sweep.tag_counts = {5, 20};
    return c;
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
    const auto c = load_config(R"({"scheme": "wakeloc", "layout": {"kind": "grid"}, "tags": {"count": 1}})");
    ScenarioConfig expected;
    expected.layout.kind = GridLayout{};
    EXPECT_EQ(c, expected);
    EXPECT_EQ(c.channel.wuc_range, 20.0);
    EXPECT_EQ(c.energy, EnergyModel{});
}

TEST(Config, RoundTrip) {
    const ScenarioConfig c = round_trip_config();
    const auto text = serialize_config(c);
    EXPECT_EQ(load_config(text), c);
    EXPECT_EQ(serialize_config(load_config(text)), text);
}

TEST(Config, RoundTripEveryLayoutKind) {
    ScenarioConfig c;
    c.layout.kind = TwoHallsLayout{};
    EXPECT_EQ(load_config(serialize_config(c)), c);
    GridLayout g;
    g.rows = 3;
    g.z_max = 3.0;
    c.layout.kind = g;
    EXPECT_EQ(load_config(serialize_config(c)), c);
}

TEST(Config, PeriodBelowFloorRejected) {
    const Error e = load_error(R"({"localization": {"period_s": 0.05}})");
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_TRUE(mentions(e, "0.060"));
    EXPECT_TRUE(mentions(e, "localization.period_s"));
}

TEST(Config, UnknownFieldNamesPath) {
    const Error e = load_error(R"({"channel": {"uwb_range_m": 50, "bogus": 1}})");
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_TRUE(mentions(e, "channel.bogus"));
    EXPECT_EQ(load_error(R"({"extra": true})").code(), Errc::ParseError);
}

TEST(Config, WrongTypeAndMalformed) {
    const Error e = load_error(R"({"tags": {"count": "five"}})");
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_TRUE(mentions(e, "tags.count"));
    EXPECT_EQ(load_error("{not json").code(), Errc::ParseError);
    EXPECT_EQ(load_error(R"({"scheme": "tdoa"})").code(), Errc::ParseError);
}

TEST(Config, ValidationCollectsEveryViolation) {
    const Error e = load_error(
        R"({"channel": {"wuc_range_m": 60}, "layout": {"kind": "explicit", "anchors": []}, "tags": {"count": -1}})");
    EXPECT_EQ(e.code(), Errc::ValidationError);
    EXPECT_GE(e.details().size(), 3u);
    EXPECT_TRUE(mentions(e, "wuc_range"));
    EXPECT_TRUE(mentions(e, "zero anchors"));
    EXPECT_TRUE(mentions(e, "tags.count"));
}

TEST(Config, HorizonRequiredWithoutRoundCap) {
    EXPECT_EQ(load_error(R"({"localization": {"rounds_per_tag": null}})").code(), Errc::ValidationError);
    EXPECT_NO_THROW(load_config(R"({"horizon_s": 10, "localization": {"rounds_per_tag": null}})"));
}

TEST(Config, MissingFile) {
    try {
        load_config_file("/nonexistent/config.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Io);
        EXPECT_TRUE(mentions(e, "/nonexistent/config.json"));
    }
}

TEST(Layout, GridCorners) {
    LayoutSpec spec;
    GridLayout g;
    g.rows = 2;
    g.cols = 2;
    g.spacing = 10.0;
    spec.kind = g;
    const Layout l = generate_layout(spec, 1);
    ASSERT_EQ(l.anchors.size(), 4u);
    const std::set<std::pair<double, double>> corners{{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    for (const auto& a : l.anchors) EXPECT_TRUE(corners.count({a.x, a.y}));
}

TEST(Layout, TwoHallsDefaults) {
    LayoutSpec spec;
    spec.kind = TwoHallsLayout{};
    const FloorPlan plan = floor_plan(spec);
    double area = 0.0;
    for (const auto& r : plan.regions) area += r.area();
    EXPECT_NEAR(area, 6382.0, 1e-9);

    const Layout l = generate_layout(spec, 7);
    EXPECT_EQ(l.anchors.size(), 89u);
    for (const auto& a : l.anchors) {
        EXPECT_TRUE(l.floor.in_regions(a.x, a.y));
        EXPECT_GE(a.z, 2.0);
        EXPECT_LE(a.z, 3.0);
    }
    EXPECT_EQ(coverage_deficit(l, 50.0, 5), 0u);
    const Layout again = generate_layout(spec, 7);
    EXPECT_EQ(again.anchors, l.anchors);
    EXPECT_NE(generate_layout(spec, 8).anchors, l.anchors);
}

TEST(Layout, InfeasibleCoverage) {
    LayoutSpec spec;
    TwoHallsLayout t;
    t.anchor_count = 6;
    spec.kind = t;
    try {
        generate_layout(spec, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InfeasibleSpec);
    }
}

TEST(Layout, ExplicitAreaDefaultsToBoundingBox) {
    LayoutSpec spec;
    ExplicitLayout e;
    e.anchors = {{0, 0, 2}, {12, 0, 2}, {0, 8, 2}};
    spec.kind = e;
    const FloorPlan plan = floor_plan(spec);
    EXPECT_EQ(plan.bounds(), (Rect{0, 0, 12, 8}));
}

TEST(Placements, CountsAndFreeArea) {
    LayoutSpec spec;
    spec.kind = TwoHallsLayout{};
    const Layout l = generate_layout(spec, 3);
    const auto sets = sample_placements(l, 5, 20, 3, 1.0);
    ASSERT_EQ(sets.size(), 20u);
    for (const auto& s : sets) {
        ASSERT_EQ(s.size(), 5u);
        for (const auto& p : s) {
            EXPECT_TRUE(l.floor.free(p.x, p.y));
            EXPECT_EQ(p.z, 1.0);
        }
    }
    EXPECT_EQ(sample_placements(l, 5, 20, 3, 1.0), sets);
    for (const auto& s : sample_placements(l, 0, 4, 3, 1.0)) EXPECT_TRUE(s.empty());
}

TEST(Placements, NearlyBlockedFloorTerminates) {
    LayoutSpec spec;
    GridLayout g;
    g.spacing = 10.0;
    spec.kind = g;
    spec.obstacles = std::vector<Rect>{{0, 0, 10, 9.95}};
    const Layout l = generate_layout(spec, 1);
    try {
        sample_placements(l, 50, 1, 1, 1.0, 200);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::PlacementExhausted);
    }
}

TEST(Slots, NeighboursNeverShare) {
    LayoutSpec spec;
    spec.kind = TwoHallsLayout{};
    const Layout l = generate_layout(spec, 2);
    const auto slots = assign_slots(l.anchors, 40.0);
    ASSERT_EQ(slots.size(), l.anchors.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        EXPECT_GE(slots[i], 1);
        for (std::size_t j = i + 1; j < slots.size(); ++j) {
            if (distance(l.anchors[i], l.anchors[j]) < 40.0) EXPECT_NE(slots[i], slots[j]);
        }
    }
}

TEST(Cells, PartitionCoversEveryAnchorOnce) {
    LayoutSpec spec;
    spec.kind = TwoHallsLayout{};
    const Layout l = generate_layout(spec, 2);
    const auto cells = partition_cells(l.anchors, 5, 50.0);
    std::vector<int> seen(l.anchors.size(), 0);
    for (const auto& c : cells) {
        EXPECT_LE(c.members.size(), 5u);
        EXPECT_EQ(c.initiator(), *std::min_element(c.members.begin(), c.members.end()));
        for (auto m : c.members) {
            ++seen[m];
            EXPECT_LE(distance(l.anchors[m], l.anchors[c.members.front()]), 50.0);
        }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Seeds, StreamsDiffer) {
    EXPECT_EQ(stream_seed(1, 2, 3), stream_seed(1, 2, 3));
    EXPECT_NE(stream_seed(1, 2, 3), stream_seed(1, 3, 2));
    EXPECT_NE(stream_seed(1, 2, 3), stream_seed(2, 2, 3));
}
