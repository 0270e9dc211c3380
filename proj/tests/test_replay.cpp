#include <gtest/gtest.h>

#include "wakeloc/error.hpp"
#include "wakeloc/experiment.hpp"
#include "wakeloc/replay.hpp"

using namespace wakeloc;

namespace {

ScenarioConfig cell(Scheme scheme, int tags) {
    ScenarioConfig c;
    c.scheme = scheme;
    ExplicitLayout layout;
    layout.anchors = {{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}, {6, 6, 2.5}};
    c.layout.kind = layout;
    c.tags.count = tags;
    c.solver.n_particles = 2000;
    c.localization.period_s = 1.0;
    c.localization.rounds_per_tag = 3;
    return c;
}

}  // namespace

TEST(Replay, CsvRoundTrip) {
    const auto r = run_scenario(cell(Scheme::WakeLoc, 3));
    const auto rows = measurement_rows(r.outcomes());
    ASSERT_FALSE(rows.empty());
    const auto text = measurements_csv(rows);
    EXPECT_EQ(parse_measurements_csv(text), rows);
}

TEST(Replay, OfflineMatchesOnline) {
    for (Scheme s : {Scheme::WakeLoc, Scheme::FlexTdoa, Scheme::ApTwr}) {
        const auto r = run_scenario(cell(s, 3));
        const auto outcomes = r.outcomes();
        const auto rows = parse_measurements_csv(measurements_csv(measurement_rows(outcomes)));
        const auto est = solve_measurements(rows, r.config.solver, TwrOptions{}, 1);
        std::size_t matched = 0;
        for (const auto& o : outcomes) {
            if (!o.success()) continue;
            for (const auto& e : est) {
                if (e.round == o.round && e.receiver == o.node.value) {
                    ASSERT_TRUE(e.position) << e.status;
                    EXPECT_LT(distance(*e.position, *o.estimate), 1e-3) << to_string(s);
                    ++matched;
                }
            }
        }
        EXPECT_GT(matched, 0u) << to_string(s);
    }
}

TEST(Replay, ParseErrorsNameTheLine) {
    const std::string header = "round,receiver,kind,anchor_index,x,y,z,t_ps,t_frac_ps,cfo,reply_s,reply_nominal_s\n";
    try {
        parse_measurements_csv(header + "1,2,twr,1,0,0,2,100,0,1,0.00095,0.00095\n1,2,twr,x,0,0,2,100,0,1,0,0\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW(parse_measurements_csv("a,b\n"), Error);
    EXPECT_THROW(parse_measurements_csv(""), Error);
    EXPECT_THROW(parse_measurements_csv(header + "1,2,rssi,1,0,0,2,100,0,1,0,0\n"), Error);
}

TEST(Replay, MissingReferenceReported) {
    const std::string csv =
        "round,receiver,kind,anchor_index,x,y,z,t_ps,t_frac_ps,cfo,reply_s,reply_nominal_s\n"
        "4,9,tdoa,1,0,0,2,100,0,1,0.00095,0\n";
    const auto est = solve_measurements(parse_measurements_csv(csv), SolverParams{}, TwrOptions{}, 1);
    ASSERT_EQ(est.size(), 1u);
    EXPECT_FALSE(est[0].position);
    EXPECT_EQ(est[0].status, "MissingReference");
    EXPECT_EQ(estimates_csv(est), "round,receiver,method,x,y,z,status\n4,9,tdoa,,,,MissingReference\n");
}
