#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wakeloc/protocols.hpp"
#include "wakeloc/solvers.hpp"

namespace wakeloc {

// One solver input as recorded by a tag. For "twr" rows t_ps/t_frac_ps hold
// the round time; for "tdoa_ref" and "tdoa" rows the local arrival time. The
// reference row carries the initiator position.
struct MeasurementRow {
    std::uint64_t round = 0;
    std::uint32_t receiver = 0;
    std::string kind;  // twr | tdoa_ref | tdoa
    int anchor_index = 0;
    Position3 position;
    std::int64_t t_ps = 0;
    double t_frac_ps = 0.0;
    double cfo = 1.0;
    double reply_s = 0.0;          // reported reply (twr) or scheduled delay (tdoa)
    double reply_nominal_s = 0.0;  // twr only

    friend bool operator==(const MeasurementRow&, const MeasurementRow&) = default;
};

std::vector<MeasurementRow> measurement_rows(std::span<const LocalizationOutcome> outcomes);
std::string measurements_csv(std::span<const MeasurementRow> rows);
// Throws ParseError naming the line.
std::vector<MeasurementRow> parse_measurements_csv(std::string_view text);

struct OfflineEstimate {
    std::uint64_t round = 0;
    std::uint32_t receiver = 0;
    std::string method;  // twr | tdoa
    std::optional<Position3> position;
    std::string status;  // ok or the error code
};

// Groups rows by (round, receiver, method) and solves each group.
std::vector<OfflineEstimate> solve_measurements(std::span<const MeasurementRow> rows, const SolverParams& solver,
                                                const TwrOptions& twr, std::uint64_t seed);
std::string estimates_csv(std::span<const OfflineEstimate> estimates);

}  // namespace wakeloc
