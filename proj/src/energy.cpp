#include "wakeloc/energy.hpp"

#include <algorithm>
#include <cmath>

#include "wakeloc/error.hpp"

namespace wakeloc {

namespace {

void require_n(int n) {
    if (n < 1) throw Error(Errc::InvalidArgument, "anchor count must be >= 1");
}

}  // namespace

std::string_view to_string(EnergyRole role) {
    switch (role) {
        case EnergyRole::ActiveTag: return "active_tag";
        case EnergyRole::PassiveTag: return "passive_tag";
        case EnergyRole::Anchor: return "anchor";
    }
    return "?";
}

std::string_view to_string(PowerState s) {
    return s == PowerState::WakeUp ? "wakeup" : "localization";
}

std::vector<std::string> EnergyModel::violations() const {
    std::vector<std::string> out;
    const std::pair<const char*, double> positive[] = {
        {"wakeup_active_j", wakeup_active},
        {"wakeup_passive_j", wakeup_passive},
        {"wakeup_anchor_j", wakeup_anchor},
        {"wakeup_reference_duration_s", wakeup_reference_duration},
        {"loc_active_base_j", loc_active_base},
        {"loc_active_step_j", loc_active_step},
        {"loc_passive_base_j", loc_passive_base},
        {"loc_passive_step_j", loc_passive_step},
        {"loc_anchor_base_j", loc_anchor_base},
        {"loc_anchor_step_j", loc_anchor_step},
        {"dur_active_base_s", dur_active_base},
        {"dur_active_step_s", dur_active_step},
        {"dur_passive_base_s", dur_passive_base},
        {"dur_passive_step_s", dur_passive_step},
        {"dur_anchor_base_s", dur_anchor_base},
        {"dur_anchor_step_s", dur_anchor_step},
        {"sleep_power_w", sleep_power},
        {"aptwr_rx_idle_power_w", aptwr_rx_idle_power},
    };
    for (const auto& [name, v] : positive) {
        if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string("energy.") + name + " must be > 0");
    }
    return out;
}

double localization_steps(EnergyRole role, int n) {
    require_n(n);
    switch (role) {
        case EnergyRole::ActiveTag: return static_cast<double>(n);
        case EnergyRole::PassiveTag: return static_cast<double>(n - 1);
        case EnergyRole::Anchor: return static_cast<double>(n - 1) / 2.0;  // exact: halves are representable
    }
    return 0.0;
}

double localization_energy(EnergyRole role, int n, const EnergyModel& m) {
    const double k = localization_steps(role, n);
    switch (role) {
        case EnergyRole::ActiveTag: return m.loc_active_base + k * m.loc_active_step;
        case EnergyRole::PassiveTag: return m.loc_passive_base + k * m.loc_passive_step;
        case EnergyRole::Anchor: return m.loc_anchor_base + k * m.loc_anchor_step;
    }
    return 0.0;
}

double localization_duration(EnergyRole role, int n, const EnergyModel& m) {
    const double k = localization_steps(role, n);
    switch (role) {
        case EnergyRole::ActiveTag: return m.dur_active_base + k * m.dur_active_step;
        case EnergyRole::PassiveTag: return m.dur_passive_base + k * m.dur_passive_step;
        case EnergyRole::Anchor: return m.dur_anchor_base + k * m.dur_anchor_step;
    }
    return 0.0;
}

double wakeup_energy(EnergyRole role, double wuc_duration_s, const EnergyModel& m) {
    const double scale = wuc_duration_s / m.wakeup_reference_duration;
    switch (role) {
        case EnergyRole::ActiveTag: return m.wakeup_active * scale;
        case EnergyRole::PassiveTag: return m.wakeup_passive * scale;
        case EnergyRole::Anchor: return m.wakeup_anchor * scale;
    }
    return 0.0;
}

double EnergyLedger::event_energy() const {
    double e = 0.0;
    for (const auto& x : entries) e += x.energy;
    return e;
}

TimeDuration EnergyLedger::busy_time() const {
    TimeDuration t{};
    for (const auto& x : entries) t += x.end - x.start;
    return t;
}

double average_power(const EnergyLedger& ledger) {
    if (ledger.horizon.count() <= 0) throw Error(Errc::InvalidArgument, "ledger horizon must be > 0");
    std::vector<const LedgerEntry*> sorted;
    sorted.reserve(ledger.entries.size());
    for (const auto& e : ledger.entries) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->start < b->start; });

    const TimeInstant end_of_horizon = TimeInstant(0) + ledger.horizon;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& e = *sorted[i];
        if (e.end < e.start || e.start < TimeInstant(0) || e.end > end_of_horizon) {
            throw Error(Errc::InvalidArgument, "ledger entry outside the horizon");
        }
        if (i > 0 && sorted[i - 1]->end > e.start) {
            throw Error(Errc::OverlappingIntervals, "ledger intervals overlap for node " + std::to_string(ledger.node.value));
        }
    }
    const double horizon_s = ledger.horizon.to_seconds();
    const double idle_s = (ledger.horizon - ledger.busy_time()).to_seconds();
    return (ledger.event_energy() + ledger.idle_power * idle_s) / horizon_s;
}

double battery_lifetime_s(double avg_power_w, double capacity_wh) {
    if (!(avg_power_w > 0.0)) throw Error(Errc::InvalidArgument, "average power must be > 0");
    return capacity_wh * 3600.0 / avg_power_w;
}

double aptwr_anchor_power(double rate, int n, const EnergyModel& m) {
    if (!(rate >= 0.0)) throw Error(Errc::InvalidArgument, "round rate must be >= 0");
    const double busy = std::min(1.0, rate * localization_duration(EnergyRole::Anchor, n, m));
    return m.aptwr_rx_idle_power * (1.0 - busy) + rate * localization_energy(EnergyRole::Anchor, n, m);
}

}  // namespace wakeloc
