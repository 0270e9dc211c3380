#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wakeloc/energy.hpp"
#include "wakeloc/scenario.hpp"

namespace wakeloc {

struct CriterionResult {
    int id = 0;
    std::string group;
    std::string name;
    bool pass = false;
    std::string measured;
    std::string target;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    EnergyModel energy;                 // swap in to check the suite reacts
    double battery_capacity_wh = 0.690;
    int workers = 1;
    std::vector<std::string> groups;    // empty: all groups
    std::uint64_t seed = 1;
    std::function<void(const CriterionResult&)> on_result;  // called as each criterion finishes
};

// Groups: power, latency, energy, solver, collision, determinism, budget.
std::vector<std::string> acceptance_groups();

// Runs the selected criteria in id order. The budget criterion times
// everything that ran before it.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

// One line per criterion: "[PASS] 1 power ... measured ... target ...".
std::string format_result(const CriterionResult& r);

// Canned configurations behind the criteria.
ScenarioConfig single_cell_config(Scheme scheme, const EnergyModel& energy);
ScenarioConfig two_halls_config(Scheme scheme, const EnergyModel& energy);

}  // namespace wakeloc
