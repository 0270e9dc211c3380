#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wakeloc/replay.hpp"
#include "wakeloc/report.hpp"
#include "wakeloc/scenario.hpp"
#include "wakeloc/simkernel.hpp"

namespace wakeloc {

// Results of every placement of one configuration, in placement order.
struct ScenarioResult {
    ScenarioConfig config;
    Layout layout;
    std::vector<Deployment> deployments;
    std::vector<SimulationTrace> traces;

    std::vector<LocalizationOutcome> outcomes() const;  // all placements
    std::vector<PowerSample> power_samples() const;
    double period_s() const;  // the x-axis value for power rows
};

// Runs `count` independent jobs on up to `workers` threads; job i writes only
// slot i, so the result does not depend on the schedule.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

ScenarioResult run_scenario(const ScenarioConfig& config, int workers = 1);

// Applies one sweep point: the localization period (FlexTDOA: also T_F) and
// the tag count. Triggers start at t = 0 so the averaging window has no idle
// lead-in.
ScenarioConfig sweep_point(const ScenarioConfig& base, double period_s, int n_tags);

// Power samples of the full cross product, ordered by (period, tag count,
// placement).
std::vector<PowerSample> run_sweep(const ScenarioConfig& base, const std::vector<double>& periods,
                                   const std::vector<int>& tag_counts, int workers = 1);

// Default worker count: WAKELOC_WORKERS if set, else 1.
int default_workers();

}  // namespace wakeloc
