#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wakeloc/core.hpp"

namespace wakeloc {

// Role as far as energy accounting is concerned.
enum class EnergyRole { ActiveTag, PassiveTag, Anchor };

std::string_view to_string(EnergyRole role);

// Per-event costs measured on the reference hardware. Energies in joules,
// durations in seconds. Localization terms are base + step * steps(N) with
// steps = N for the active tag, N-1 for the passive tag and (N-1)/2 for anchors.
struct EnergyModel {
    double wakeup_active = 5.61e-3;
    double wakeup_passive = 6.6e-6;
    double wakeup_anchor = 5.61e-6;
    double wakeup_reference_duration = 0.055;  // wake-up call length the costs were measured at

    double loc_active_base = 217.97e-6;
    double loc_active_step = 24.88e-6;
    double loc_passive_base = 236.97e-6;
    double loc_passive_step = 24.88e-6;
    double loc_anchor_base = 147.87e-6;
    double loc_anchor_step = 9.66e-6;

    double dur_active_base = 3.19e-3;
    double dur_active_step = 210e-6;
    double dur_passive_base = 3.15e-3;
    double dur_passive_step = 210e-6;
    double dur_anchor_base = 2.78e-3;
    double dur_anchor_step = 230e-6;

    double sleep_power = 12.05e-6;          // W, includes the idle wake-up receiver
    double aptwr_rx_idle_power = 120.9e-3;  // W, always-listening UWB receiver

    std::vector<std::string> violations() const;

    friend bool operator==(const EnergyModel&, const EnergyModel&) = default;
};

// Number of step increments for `role` with N anchors; (N-1)/2 may be a half.
double localization_steps(EnergyRole role, int n_anchors);

// Throw InvalidArgument for N < 1.
double localization_energy(EnergyRole role, int n_anchors, const EnergyModel& model = {});
double localization_duration(EnergyRole role, int n_anchors, const EnergyModel& model = {});

// Wake-up cost, scaled linearly with the wake-up call length relative to the
// reference duration (5 ms pattern what-if).
double wakeup_energy(EnergyRole role, double wuc_duration_s, const EnergyModel& model = {});

enum class PowerState { WakeUp, Localization };

std::string_view to_string(PowerState s);

struct LedgerEntry {
    PowerState state = PowerState::Localization;
    TimeInstant start;
    TimeInstant end;
    double energy = 0.0;  // J
    std::uint64_t round = 0;

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

// Energy timeline of one node. Gaps between entries are spent at idle_power
// (the sleep floor, or the listening receiver for always-on anchors).
struct EnergyLedger {
    NodeId node;
    double idle_power = 12.05e-6;
    TimeDuration horizon{};
    std::vector<LedgerEntry> entries;

    double event_energy() const;
    TimeDuration busy_time() const;

    friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;
};

// (sum of event energies + idle_power * idle time) / horizon, in watts.
// Throws OverlappingIntervals, InvalidArgument (horizon <= 0, entry outside it).
double average_power(const EnergyLedger& ledger);

// capacity / power, in seconds.
double battery_lifetime_s(double avg_power_w, double capacity_wh);

inline constexpr double kSecondsPerDay = 86'400.0;
inline constexpr double kSecondsPerYear = 365.0 * kSecondsPerDay;

// Always-on anchor: idle receiver outside rounds plus per-round cost.
double aptwr_anchor_power(double round_rate_hz, int n_anchors, const EnergyModel& model = {});

}  // namespace wakeloc
