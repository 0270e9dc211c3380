#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wakeloc/error.hpp"
#include "wakeloc/protocols.hpp"
#include "wakeloc/solvers.hpp"

using namespace wakeloc;

namespace {

constexpr double kReply = 720e-6;

TwrMeasurement twr(double d, double anchor_skew, bool report_cfo = true) {
    TwrMeasurement m;
    m.t_reply_nominal = kReply;
    m.t_round_local = 2.0 * d / kSpeedOfLight + kReply / (1.0 + anchor_skew);
    m.cfo = report_cfo ? 1.0 + anchor_skew : 1.0;
    return m;
}

const std::vector<Position3> kSquare{{0, 0, 2}, {10, 0, 2}, {0, 10, 2}, {10, 10, 2}};

std::vector<RangeObservation> exact_ranges(const std::vector<Position3>& anchors, const Position3& p) {
    std::vector<RangeObservation> out;
    for (const auto& a : anchors) out.push_back({a, distance(a, p)});
    return out;
}

// Noise-free downlink round heard at `tag`; responders use slots 1..n.
std::vector<TdoaMeasurement> tdoa_round(const std::vector<Position3>& anchors, const Position3& init,
                                        const Position3& tag, const std::vector<double>& skews = {}) {
    const ResponseSchedule s;
    std::vector<TdoaMeasurement> ms;
    TdoaMeasurement ref;
    ref.anchor_position = init;
    ref.initiator_position = init;
    ref.reference = true;
    ref.t_arrival_local = Timestamp{}.plus_seconds(distance(init, tag) / kSpeedOfLight);
    ms.push_back(ref);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const double e = skews.empty() ? 0.0 : skews[i];
        TdoaMeasurement m;
        m.anchor_index = static_cast<int>(i) + 1;
        m.anchor_position = anchors[i];
        m.initiator_position = init;
        m.delta_t = s.delta_t(m.anchor_index).to_seconds();
        m.cfo = 1.0 + e;
        m.t_arrival_local = Timestamp{}.plus_seconds(distance(init, anchors[i]) / kSpeedOfLight +
                                                     m.delta_t / (1.0 + e) + distance(anchors[i], tag) / kSpeedOfLight);
        ms.push_back(m);
    }
    return ms;
}

}  // namespace

TEST(Twr, ExactInversion) {
    EXPECT_NEAR(cc_ss_twr_range(twr(10.0, 0.0)), 10.0, 1e-6);
}

TEST(Twr, CfoCorrection) {
    EXPECT_NEAR(cc_ss_twr_range(twr(10.0, 10e-6)), 10.0, 1e-3);
    const double biased = cc_ss_twr_range(twr(10.0, 10e-6), {false, 100.0});
    EXPECT_NEAR(biased - 10.0, -kSpeedOfLight * kReply * 1e-5 / 2.0, 2e-3);
    EXPECT_NEAR(std::fabs(biased - 10.0), 1.079, 0.002);
}

TEST(Twr, ReportedReplyIsUsed) {
    TwrMeasurement m = twr(5.0, 0.0);
    m.t_reply_reported = kReply + 1e-9;
    m.t_round_local += 1e-9;
    EXPECT_NEAR(cc_ss_twr_range(m), 5.0, 1e-6);
}

TEST(Twr, RejectsInvalid) {
    TwrMeasurement m = twr(5.0, 0.0);
    m.t_round_local = kReply * 0.5;
    EXPECT_THROW(cc_ss_twr_range(m), Error);
    m = twr(5.0, 0.0);
    m.t_reply_nominal = 0.0;
    EXPECT_THROW(cc_ss_twr_range(m), Error);
    m = twr(5.0, 0.0);
    m.cfo = 1.01;
    EXPECT_THROW(cc_ss_twr_range(m), Error);
    try {
        cc_ss_twr_range(twr(150.0, 0.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ImplausibleRange);
    }
}

TEST(Trilaterate, ExactSquare) {
    SolverParams p;
    p.fixed_z = 0.0;
    const auto est = trilaterate(exact_ranges(kSquare, {5, 5, 0}), p);
    EXPECT_NEAR(est.position.x, 5.0, 1e-6);
    EXPECT_NEAR(est.position.y, 5.0, 1e-6);
    EXPECT_DOUBLE_EQ(est.position.z, 0.0);
}

TEST(Trilaterate, PerturbedRangeMatchesGridSearch) {
    SolverParams p;
    p.fixed_z = 0.0;
    auto obs = exact_ranges(kSquare, {5, 5, 0});
    obs[1].range += 0.03;
    const auto est = trilaterate(obs, p);
    // Brute-force oracle at 1 mm around the truth.
    double best = 1e18, bx = 0, by = 0;
    for (int i = -100; i <= 100; ++i) {
        for (int j = -100; j <= 100; ++j) {
            const Position3 q{5 + i * 1e-3, 5 + j * 1e-3, 0};
            double cost = 0;
            for (double r : range_residuals(q, obs)) cost += r * r;
            if (cost < best) best = cost, bx = q.x, by = q.y;
        }
    }
    EXPECT_NEAR(est.position.x, bx, 1.5e-3);
    EXPECT_NEAR(est.position.y, by, 1.5e-3);
    EXPECT_LT(std::hypot(est.position.x - 5, est.position.y - 5), 0.05);
}

TEST(Trilaterate, ThreeDimensional) {
    SolverParams p;
    p.dimension = SolveDimension::ThreeD;
    const std::vector<Position3> anchors{{0, 0, 0}, {10, 0, 3}, {0, 10, 1}, {10, 10, 4}, {5, 5, 6}};
    const auto est = trilaterate(exact_ranges(anchors, {3, 6, 1.5}), p);
    EXPECT_NEAR(distance(est.position, {3, 6, 1.5}), 0.0, 1e-6);
}

TEST(Trilaterate, CollinearIsDegenerate) {
    const std::vector<Position3> line{{0, 0, 2}, {5, 0, 2}, {10, 0, 2}};
    try {
        trilaterate(exact_ranges(line, {5, 5, 1}), SolverParams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DegenerateGeometry);
    }
    EXPECT_THROW(check_anchor_geometry(line, SolveDimension::TwoD, 1e-6), Error);
    EXPECT_NO_THROW(check_anchor_geometry(kSquare, SolveDimension::TwoD, 1e-6));
    EXPECT_THROW(check_anchor_geometry(kSquare, SolveDimension::ThreeD, 1e-6), Error);
}

TEST(Trilaterate, JacobianMatchesFiniteDifference) {
    const auto obs = exact_ranges(kSquare, {3, 4, 1});
    const Position3 p{2, 7, 1};
    const auto J = range_jacobian(p, obs, SolveDimension::TwoD);
    ASSERT_EQ(J.cols(), 2);
    const double h = 1e-6;
    const auto r0 = range_residuals(p, obs);
    const auto rx = range_residuals(p + Position3{h, 0, 0}, obs);
    for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_NEAR(J(i, 0), (rx[i] - r0[i]) / h, 1e-5);
}

TEST(Tdoa, PredictedArrivalIdentities) {
    TdoaMeasurement m;
    m.anchor_position = {0, 0, 0};
    m.initiator_position = {0, 0, 0};
    m.delta_t = 950e-6;
    const Position3 p{10, 0, 0};
    TdoaMeasurement ref = m;
    ref.reference = true;
    ref.delta_t = 0.0;
    const double diff = tdoa_predicted_arrival(p, m) - tdoa_predicted_arrival(p, ref);
    EXPECT_NEAR(diff, 950e-6, 1e-15);
    m.cfo = 1.00001;
    const double scaled = tdoa_predicted_arrival(p, m) - tdoa_predicted_arrival(p, ref);
    EXPECT_NEAR(diff - scaled, 9.5e-9, 1e-12);
    EXPECT_DOUBLE_EQ(tdoa_predicted_arrival({0, 0, 0}, ref), 0.0);
}

TEST(Tdoa, ResidualsZeroAtTruth) {
    const std::vector<Position3> anchors{{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}};
    const Position3 init{6, 6, 2.5}, tag{4, 7, 1};
    const auto ms = tdoa_round(anchors, init, tag, {5e-6, -12e-6, 20e-6, -3e-6});
    const auto r = tdoa_residuals(tag, ms);
    ASSERT_EQ(r.size(), 4u);
    for (double v : r) EXPECT_LE(std::fabs(v), 2e-12);
}

TEST(Tdoa, ResidualSignFollowsGeometry) {
    const std::vector<Position3> anchors{{0, 0, 1}, {12, 0, 1}, {0, 12, 1}, {12, 12, 1}};
    const Position3 init{6, 6, 1}, tag{4, 7, 1};
    const auto ms = tdoa_round(anchors, init, tag);
    const Position3 moved = tag + Position3{1, 0, 0};
    const auto r = tdoa_residuals(moved, ms);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const double dd = (distance(anchors[i], moved) - distance(anchors[i], tag)) -
                          (distance(init, moved) - distance(init, tag));
        EXPECT_NEAR(r[i], -dd / kSpeedOfLight, 1e-13);
    }
}

TEST(Tdoa, SymmetricConfigurationHasZeroResiduals) {
    const std::vector<Position3> anchors{{-5, 0, 1}, {5, 0, 1}, {0, -5, 1}, {0, 5, 1}};
    TdoaMeasurement ref;
    ref.reference = true;
    ref.anchor_position = ref.initiator_position = {0, 0, 1};
    ref.t_arrival_local = Timestamp{};
    std::vector<TdoaMeasurement> ms{ref};
    for (const auto& a : anchors) {
        TdoaMeasurement m;
        m.anchor_position = a;
        m.initiator_position = {0, 0, 1};
        m.delta_t = 0.0;
        m.t_arrival_local = Timestamp{}.plus_seconds(10.0 / kSpeedOfLight);
        ms.push_back(m);
    }
    for (double v : tdoa_residuals({0, 0, 1}, ms)) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Tdoa, MissingReference) {
    const auto ms = tdoa_round(kSquare, {5, 5, 2}, {3, 3, 1});
    std::vector<TdoaMeasurement> no_ref(ms.begin() + 1, ms.end());
    try {
        tdoa_residuals({0, 0, 1}, no_ref);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingReference);
    }
}

TEST(Tdoa, JacobianMatchesFiniteDifference) {
    const auto ms = tdoa_round(kSquare, {5, 5, 2}, {3, 3, 1});
    const Position3 p{4, 6, 1};
    const auto J = tdoa_jacobian(p, ms, SolveDimension::TwoD);
    const double h = 1e-5;
    const auto r0 = tdoa_residuals(p, ms);
    const auto ry = tdoa_residuals(p + Position3{0, h, 0}, ms);
    for (std::size_t i = 0; i < r0.size(); ++i) {
        EXPECT_NEAR(std::fabs(J(i, 1)), std::fabs(kSpeedOfLight * (ry[i] - r0[i]) / h), 1e-4);
    }
}

TEST(ParticleFilter, NoiseFreeWithinOneCentimetre) {
    const std::vector<Position3> anchors{{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}};
    const Position3 init{6, 6, 2.5}, tag{3.3, 8.1, 1};
    const auto ms = tdoa_round(anchors, init, tag, {5e-6, -12e-6, 20e-6, -3e-6});
    std::mt19937_64 rng(4);
    const auto sol = particle_filter_solve(ms, SolverParams{}, rng);
    EXPECT_LT(distance(sol.position, tag), 0.01);
    EXPECT_TRUE(sol.refined);
}

TEST(ParticleFilter, Deterministic) {
    const auto ms = tdoa_round(kSquare, {5, 5, 2}, {3, 3, 1});
    std::mt19937_64 a(8), b(8);
    EXPECT_EQ(particle_filter_solve(ms, SolverParams{}, a).position,
              particle_filter_solve(ms, SolverParams{}, b).position);
}

TEST(ParticleFilter, MonteCarloNoiseRegime) {
    const std::vector<Position3> anchors{{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}};
    const Position3 init{6, 6, 2.5}, tag{5, 4, 1};
    std::mt19937_64 noise(17), rng(18);
    std::normal_distribution<double> toa(0.0, 0.1e-9);
    SolverParams params;
    params.n_particles = 2000;
    double se = 0.0;
    for (int k = 0; k < 500; ++k) {
        auto ms = tdoa_round(anchors, init, tag);
        for (auto& m : ms) m.t_arrival_local = m.t_arrival_local.plus_seconds(toa(noise));
        const auto sol = particle_filter_solve(ms, params, rng);
        se += std::pow(sol.position.x - tag.x, 2) + std::pow(sol.position.y - tag.y, 2);
    }
    const double rmse = std::sqrt(se / 500.0);
    EXPECT_GE(rmse, 0.01);
    EXPECT_LE(rmse, 0.15);
}

TEST(ParticleFilter, DerivedBoxCoversAnchorsAndMargin) {
    const auto ms = tdoa_round(kSquare, {5, 5, 2}, {3, 3, 1});
    const Box b = derived_box(ms, SolverParams{});
    EXPECT_DOUBLE_EQ(b.min.x, -5.0);
    EXPECT_DOUBLE_EQ(b.max.y, 15.0);
}

TEST(ParticleFilter, TruthOutsideBox) {
    const std::vector<Position3> anchors{{0, 0, 2}, {12, 0, 2}, {0, 12, 2}, {12, 12, 2}};
    const Position3 tag{13, 6, 1};
    const auto ms = tdoa_round(anchors, {6, 6, 2.5}, tag);
    SolverParams params;
    params.box = Box{{0, 0, 0}, {12, 12, 3}};
    std::mt19937_64 rng(2);
    const auto sol = particle_filter_solve(ms, params, rng);
    if (sol.refined) {
        EXPECT_LT(distance(sol.position, tag), 0.01);
    } else {
        EXPECT_EQ(sol.position, sol.particle_mean);
    }
}

TEST(Solver, ParamsValidation) {
    SolverParams p;
    EXPECT_TRUE(p.violations().empty());
    p.n_particles = 0;
    EXPECT_FALSE(p.violations().empty());
    EXPECT_EQ(unknowns(SolveDimension::TwoD), 2);
    EXPECT_EQ(unknowns(SolveDimension::ThreeD), 3);
}
