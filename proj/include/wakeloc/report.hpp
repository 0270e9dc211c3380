#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wakeloc/simkernel.hpp"

namespace wakeloc {

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

struct AxisStats {
    double avg = 0.0;
    double median = 0.0;
    double std = 0.0;  // population
};

struct ErrorStats {
    AxisStats x, y, z;  // signed, estimate - truth
    AxisStats d2, d3;   // Euclidean norms
    std::size_t n = 0;
};

// pairs are (estimate, truth). Throws EmptyInput when empty.
ErrorStats error_stats(std::span<const std::pair<Position3, Position3>> pairs);

struct AccuracyRow {
    Scheme scheme = Scheme::WakeLoc;
    OutcomeMode mode = OutcomeMode::Active;
    std::optional<ErrorStats> stats;  // absent without successes
    std::size_t attempts = 0;         // truncated rounds excluded
    std::size_t failures = 0;

    double fail_rate() const { return attempts == 0 ? 0.0 : static_cast<double>(failures) / attempts; }
};

// One row per outcome mode present, in mode order.
std::vector<AccuracyRow> accuracy_rows(Scheme scheme, std::span<const LocalizationOutcome> outcomes);

struct PowerSample {
    Scheme scheme = Scheme::WakeLoc;
    double period_s = 0.0;
    int n_tags = 0;
    int placement = 0;
    double anchor_power_w = 0.0;  // mean over anchors
    double tag_power_w = 0.0;     // mean over tags, NaN without tags
};

PowerSample power_sample(const SimulationTrace& trace, std::size_t n_anchors, double period_s, int placement);

struct PowerCurvePoint {
    Scheme scheme = Scheme::WakeLoc;
    double period_s = 0.0;
    int n_tags = 0;
    std::size_t placements = 0;
    double anchor_mean_w = 0.0, anchor_min_w = 0.0, anchor_max_w = 0.0;
    double tag_mean_w = 0.0, tag_min_w = 0.0, tag_max_w = 0.0;
};

// Groups by (scheme, period, n_tags), sorted by that key.
std::vector<PowerCurvePoint> power_curve(std::span<const PowerSample> samples);

struct LatencyRow {
    Scheme scheme = Scheme::WakeLoc;
    int n_anchors = 0;
    double latency_s = 0.0;
};

// Successful initiating localizations (active, AP-TWR, FlexTDOA) in outcome order.
std::vector<LatencyRow> latency_rows(Scheme scheme, std::span<const LocalizationOutcome> outcomes);

std::string accuracy_csv(std::span<const AccuracyRow> rows);
std::string power_csv(std::span<const PowerSample> samples);
std::string power_curve_csv(std::span<const PowerCurvePoint> points);
std::string latency_csv(std::span<const LatencyRow> rows);
// id,x,y,z,role
std::string layout_csv(const Deployment& deployment);

}  // namespace wakeloc
