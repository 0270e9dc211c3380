#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wakeloc/channel.hpp"
#include "wakeloc/core.hpp"
#include "wakeloc/energy.hpp"
#include "wakeloc/protocols.hpp"
#include "wakeloc/solvers.hpp"

namespace wakeloc {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kMinLocalizationPeriod = 0.060;  // s

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(double x, double y, double eps = 1e-9) const {
        return x >= x0 - eps && x <= x1 + eps && y >= y0 - eps && y <= y1 + eps;
    }
    double area() const { return (x1 - x0) * (y1 - y0); }

    friend bool operator==(const Rect&, const Rect&) = default;
};

// Union of open floor rectangles minus obstacle footprints.
struct FloorPlan {
    std::vector<Rect> regions;
    std::vector<Rect> obstacles;

    bool in_regions(double x, double y) const;
    bool free(double x, double y) const;  // inside a region, outside every obstacle
    Rect bounds() const;

    friend bool operator==(const FloorPlan&, const FloorPlan&) = default;
};

struct GridLayout {
    int rows = 2;
    int cols = 2;
    double spacing = 10.0;  // m
    double origin_x = 0.0;
    double origin_y = 0.0;
    double z_min = 2.0;
    double z_max = 2.0;

    friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

// Two halls joined by a corridor: hall A at the origin, the corridor centred
// on hall A's east wall, hall B centred on the corridor axis.
struct TwoHallsLayout {
    double hall_a_w = 50.0, hall_a_h = 50.0;
    double corridor_w = 48.5, corridor_h = 12.0;
    double hall_b_w = 60.0, hall_b_h = 55.0;
    int anchor_count = 89;
    double z_min = 2.0;
    double z_max = 3.0;
    double interior_fraction = 0.4;  // share of anchors on a lattice inside the halls
    int min_coverage = 5;            // anchors within UWB range of every free point

    friend bool operator==(const TwoHallsLayout&, const TwoHallsLayout&) = default;
};

struct ExplicitLayout {
    std::vector<Position3> anchors;
    std::optional<Rect> area;  // default: anchor bounding box

    friend bool operator==(const ExplicitLayout&, const ExplicitLayout&) = default;
};

struct LayoutSpec {
    std::variant<GridLayout, TwoHallsLayout, ExplicitLayout> kind = GridLayout{};
    std::optional<std::vector<Rect>> obstacles;  // default depends on the kind

    friend bool operator==(const LayoutSpec&, const LayoutSpec&) = default;
};

struct Layout {
    std::vector<Position3> anchors;
    FloorPlan floor;
};

FloorPlan floor_plan(const LayoutSpec& spec);

// Deterministic in (spec, seed). TwoHalls runs a coverage check on a 1 m grid
// and throws InfeasibleSpec when some free point has fewer than
// min_coverage anchors within `coverage_range` (horizontal).
Layout generate_layout(const LayoutSpec& spec, std::uint64_t seed, double coverage_range = 50.0);

// Number of 1 m grid points of the free floor with fewer than `k` anchors
// within horizontal distance `range`.
std::size_t coverage_deficit(const Layout& layout, double range, int k);

// Uniform rejection sampling on the free floor; z fixed at `height`.
// Throws PlacementExhausted after `max_tries` rejections for one tag.
std::vector<std::vector<Position3>> sample_placements(const Layout& layout, int n_tags, int n_placements,
                                                      std::uint64_t seed, double height,
                                                      int max_tries = 100'000);

// Response slots for WakeLoc / AP-TWR: greedy colouring in id order; anchors
// closer than `conflict_range` never share a slot.
std::vector<int> assign_slots(std::span<const Position3> anchors, double conflict_range);

struct FlexCell {
    std::vector<std::size_t> members;  // anchor indices, initiator first, then slot order
    std::size_t initiator() const { return members.front(); }
};

// Greedy proximity partition: peel cells from the periphery inward, each the
// seed plus its nearest unassigned anchors within `range`.
std::vector<FlexCell> partition_cells(std::span<const Position3> anchors, int cell_size, double range);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ClockSpec {
    double max_skew_ppm = 20.0;
    double skew_bound_ppm = 50.0;
    double max_offset_s = 1e-3;
    double drift_rate = 0.0;
    bool ideal_tags = false;  // tags keep a perfect clock

    friend bool operator==(const ClockSpec&, const ClockSpec&) = default;
};

struct ProtocolSpec {
    ResponseSchedule schedule;
    double wakeup_latency_s = 400e-6;
    double response_guard_s = 10e-6;
    double solve_time_s = 2.2e-3;
    int min_responses = 5;
    bool cfo_correction = true;
    std::optional<double> aptwr_select_range_m;  // default: WuC range
    double flex_period_s = 1.0;
    int flex_cell_size = 5;
    double flex_cell_stagger_s = 2.5e-3;
    double flex_wake_lead_s = 200e-6;

    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

enum class TriggerProcess { Periodic, Jittered, Poisson };

std::string_view to_string(TriggerProcess p);

struct TagSpec {
    int count = 1;
    double height_m = 1.0;
    int placements = 1;
    std::optional<std::vector<Position3>> positions;  // fixed positions, one placement

    friend bool operator==(const TagSpec&, const TagSpec&) = default;
};

struct LocalizationSpec {
    double period_s = 60.0;                 // per tag
    std::optional<int> rounds_per_tag = 20;  // absent: run until the horizon
    TriggerProcess process = TriggerProcess::Jittered;
    double jitter = 0.5;                    // relative half-width for the jittered process
    double start_s = 0.1;                   // first trigger not before this

    friend bool operator==(const LocalizationSpec&, const LocalizationSpec&) = default;
};

struct OutputSpec {
    bool trace = false;
    bool measurements = false;

    friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct SweepSpec {
    std::vector<double> periods_s;
    std::vector<int> tag_counts;

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct ScenarioConfig {
    int schema_version = kSchemaVersion;
    Scheme scheme = Scheme::WakeLoc;
    std::uint64_t seed = 1;
    std::optional<double> horizon_s;  // absent: derived from the trigger plan
    ChannelParams channel;
    bool obstacles_block_radio = false;
    ClockSpec clock;
    EnergyModel energy;
    double battery_capacity_wh = 0.690;
    SolverParams solver;
    ProtocolSpec protocol;
    LayoutSpec layout;
    TagSpec tags;
    LocalizationSpec localization;
    OutputSpec output;
    SweepSpec sweep;

    std::vector<std::string> violations() const;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// Throws ParseError (malformed JSON, unknown field, wrong type; message names
// the field path) or ValidationError (details lists every violation).
ScenarioConfig load_config(std::string_view text);
ScenarioConfig load_config_file(const std::string& path);
std::string serialize_config(const ScenarioConfig& config);

// Throws ValidationError if config.violations() is non-empty.
void validate(const ScenarioConfig& config);

// Derived run parameters shared by the kernel and the reports.
ProtocolContext make_protocol_context(const ScenarioConfig& config, const Layout& layout,
                                      std::span<const int> slots, int n_cells);

// Independent 64-bit stream for (seed, node, purpose).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t node, std::uint64_t purpose);

enum class StreamPurpose : std::uint64_t {
    Layout = 1,
    Placement = 2,
    Clock = 3,
    Channel = 4,
    Protocol = 5,
    Trigger = 6,
    Replication = 7,
};

}  // namespace wakeloc
