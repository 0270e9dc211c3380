#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

#include "wakeloc/acceptance.hpp"
#include "wakeloc/error.hpp"
#include "wakeloc/experiment.hpp"

using namespace wakeloc;

TEST(ParallelFor, EveryJobOnce) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(ParallelFor, PropagatesErrors) {
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw Error(Errc::InvalidArgument, "job 7");
                              }),
                 Error);
}

TEST(Scenario, WorkerCountDoesNotChangeResults) {
    ScenarioConfig c = single_cell_config(Scheme::WakeLoc, EnergyModel{});
    c.tags.count = 4;
    c.tags.placements = 4;
    c.localization.rounds_per_tag = 3;
    const auto a = run_scenario(c, 1);
    const auto b = run_scenario(c, 3);
    EXPECT_EQ(power_csv(a.power_samples()), power_csv(b.power_samples()));
    const auto oa = a.outcomes(), ob = b.outcomes();
    EXPECT_EQ(accuracy_csv(accuracy_rows(c.scheme, oa)), accuracy_csv(accuracy_rows(c.scheme, ob)));
}

TEST(Scenario, PlacementsDiffer) {
    ScenarioConfig c = single_cell_config(Scheme::WakeLoc, EnergyModel{});
    c.tags.count = 2;
    c.tags.placements = 2;
    const auto r = run_scenario(c);
    ASSERT_EQ(r.deployments.size(), 2u);
    EXPECT_NE(r.deployments[0].nodes.back().position, r.deployments[1].nodes.back().position);
    EXPECT_NE(r.deployments[0].seed, r.deployments[1].seed);
}

TEST(Sweep, PointSettings) {
    ScenarioConfig base = single_cell_config(Scheme::FlexTdoa, EnergyModel{});
    base.horizon_s = 3.0;
    base.localization.rounds_per_tag.reset();
    const auto p = sweep_point(base, 0.1, 20);
    EXPECT_EQ(p.protocol.flex_period_s, 0.1);
    EXPECT_EQ(p.localization.period_s, 0.1);
    EXPECT_EQ(p.tags.count, 20);
    EXPECT_FALSE(p.horizon_s);
    EXPECT_EQ(p.localization.rounds_per_tag, 20);
    EXPECT_EQ(p.localization.start_s, 0.0);
}

TEST(Sweep, CrossProductOrder) {
    ScenarioConfig base = single_cell_config(Scheme::FlexTdoa, EnergyModel{});
    base.localization.rounds_per_tag = 2;
    base.tags.placements = 2;
    const auto s = run_sweep(base, {0.06, 0.1, 1.0, 10.0, 100.0}, {5, 20}, 2);
    ASSERT_EQ(s.size(), 20u);
    EXPECT_EQ(s[0].period_s, 0.06);
    EXPECT_EQ(s[0].n_tags, 5);
    EXPECT_EQ(s[1].placement, 1);
    EXPECT_EQ(s[2].n_tags, 20);
    const auto curve = power_curve(s);
    EXPECT_EQ(curve.size(), 10u);
    for (std::size_t i = 1; i < 5; ++i) EXPECT_LT(curve[2 * i].anchor_mean_w, curve[2 * (i - 1)].anchor_mean_w);
}

TEST(Sweep, EmptyListsRejected) {
    const ScenarioConfig base = single_cell_config(Scheme::FlexTdoa, EnergyModel{});
    try {
        run_sweep(base, {}, {5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ValidationError);
    }
    EXPECT_THROW(run_sweep(base, {1.0}, {}), Error);
    EXPECT_THROW(run_sweep(base, {0.05}, {5}), Error);
}

TEST(Workers, EnvironmentDefault) {
    ::setenv("WAKELOC_WORKERS", "3", 1);
    EXPECT_EQ(default_workers(), 3);
    ::setenv("WAKELOC_WORKERS", "zero", 1);
    EXPECT_EQ(default_workers(), 1);
    ::unsetenv("WAKELOC_WORKERS");
    EXPECT_EQ(default_workers(), 1);
}

TEST(Acceptance, SubsetAndTamperedConstant) {
    AcceptanceOptions o;
    o.groups = {"energy"};
    auto r = run_acceptance(o);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_TRUE(r[0].pass && r[1].pass);
    EXPECT_NE(format_result(r[0]).find("[PASS]"), std::string::npos);

    o.energy.loc_anchor_step = 9.0e-6;
    r = run_acceptance(o);
    EXPECT_FALSE(r[1].pass);
    EXPECT_NE(format_result(r[1]).find("[FAIL]"), std::string::npos);

    o.groups = {"nonsense"};
    EXPECT_THROW(run_acceptance(o), Error);
}

TEST(Acceptance, TamperedEnergyFailsPowerCriterion) {
    AcceptanceOptions o;
    o.groups = {"power"};
    o.energy.loc_anchor_base = 120e-6;
    const auto r = run_acceptance(o);
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r[0].id, 1);
    EXPECT_FALSE(r[0].pass);
    EXPECT_FALSE(r[0].measured.empty());
}
