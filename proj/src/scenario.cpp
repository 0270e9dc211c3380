#include "wakeloc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wakeloc/kernels.hpp"

namespace wakeloc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Floor plans and layouts
// ---------------------------------------------------------------------------

bool FloorPlan::in_regions(double x, double y) const {
    return std::any_of(regions.begin(), regions.end(), [&](const Rect& r) { return r.contains(x, y); });
}

bool FloorPlan::free(double x, double y) const {
    if (!in_regions(x, y)) return false;
    return std::none_of(obstacles.begin(), obstacles.end(), [&](const Rect& r) { return r.contains(x, y, 0.0); });
}

Rect FloorPlan::bounds() const {
    if (regions.empty()) return {};
    Rect b = regions.front();
    for (const auto& r : regions) {
        b.x0 = std::min(b.x0, r.x0);
        b.y0 = std::min(b.y0, r.y0);
        b.x1 = std::max(b.x1, r.x1);
        b.y1 = std::max(b.y1, r.y1);
    }
    return b;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Halls {
    Rect a, corridor, b;
};

Halls halls_of(const TwoHallsLayout& t) {
    const double cy = t.hall_a_h / 2.0;
    Halls h;
    h.a = {0.0, 0.0, t.hall_a_w, t.hall_a_h};
    h.corridor = {t.hall_a_w, cy - t.corridor_h / 2.0, t.hall_a_w + t.corridor_w, cy + t.corridor_h / 2.0};
    const double bx = t.hall_a_w + t.corridor_w;
    h.b = {bx, cy - t.hall_b_h / 2.0, bx + t.hall_b_w, cy + t.hall_b_h / 2.0};
    return h;
}

std::vector<Rect> default_obstacles(const TwoHallsLayout& t) {
    const Halls h = halls_of(t);
    const double acx = (h.a.x0 + h.a.x1) / 2.0, acy = (h.a.y0 + h.a.y1) / 2.0;
    const double bcx = (h.b.x0 + h.b.x1) / 2.0, bcy = (h.b.y0 + h.b.y1) / 2.0;
    const double bw = h.b.x1 - h.b.x0, bh = h.b.y1 - h.b.y0;
    // Pillars and two shelving blocks.
    return {
        {acx - 0.5, acy - 0.5, acx + 0.5, acy + 0.5},
        {bcx - 0.5, bcy - bh / 4.0 - 0.5, bcx + 0.5, bcy - bh / 4.0 + 0.5},
        {bcx - 0.5, bcy + bh / 4.0 - 0.5, bcx + 0.5, bcy + bh / 4.0 + 0.5},
        {h.a.x0 + 0.2 * (h.a.x1 - h.a.x0), h.a.y0 + 0.7 * (h.a.y1 - h.a.y0), h.a.x0 + 0.4 * (h.a.x1 - h.a.x0),
         h.a.y0 + 0.76 * (h.a.y1 - h.a.y0)},
        {h.b.x0 + 0.7 * bw, bcy - 5.0, h.b.x0 + 0.85 * bw, bcy + 5.0},
    };
}

// Closed outline of the two-hall floor, counter-clockwise.
std::vector<std::pair<double, double>> outline(const Halls& h) {
    return {{h.a.x0, h.a.y0},           {h.a.x1, h.a.y0},           {h.a.x1, h.corridor.y0},
            {h.b.x0, h.corridor.y0},    {h.b.x0, h.b.y0},           {h.b.x1, h.b.y0},
            {h.b.x1, h.b.y1},           {h.b.x0, h.b.y1},           {h.b.x0, h.corridor.y1},
            {h.a.x1, h.corridor.y1},    {h.a.x1, h.a.y1},           {h.a.x0, h.a.y1}};
}

std::vector<std::pair<double, double>> along_outline(const std::vector<std::pair<double, double>>& poly, int n,
                                                     double phase) {
    std::vector<double> seg;
    double total = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        seg.push_back(std::hypot(q.first - p.first, q.second - p.second));
        total += seg.back();
    }
    std::vector<std::pair<double, double>> out;
    const double step = total / n;
    std::size_t i = 0;
    double seg_start = 0.0;
    for (int k = 0; k < n; ++k) {
        const double s = (k + phase) * step;
        while (i + 1 < poly.size() && s > seg_start + seg[i]) {
            seg_start += seg[i];
            ++i;
        }
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        const double f = seg[i] > 0.0 ? std::clamp((s - seg_start) / seg[i], 0.0, 1.0) : 0.0;
        out.emplace_back(p.first + f * (q.first - p.first), p.second + f * (q.second - p.second));
    }
    return out;
}

// k points spread over `hall` on a jittered lattice, avoiding obstacles.
std::vector<std::pair<double, double>> lattice(const Rect& hall, int k, const FloorPlan& floor, std::mt19937_64& rng) {
    if (k <= 0) return {};
    const double w = hall.x1 - hall.x0, h = hall.y1 - hall.y0;
    int cols = std::max(1, static_cast<int>(std::lround(std::sqrt(k * w / h))));
    int rows = (k + cols - 1) / cols;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::vector<std::pair<double, double>> cand;
        const double cw = w / cols, ch = h / rows;
        std::uniform_real_distribution<double> jit(-0.15, 0.15);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const double cx = hall.x0 + (c + 0.5) * cw, cy = hall.y0 + (r + 0.5) * ch;
                const double jx = cx + jit(rng) * cw, jy = cy + jit(rng) * ch;
                if (floor.free(jx, jy)) {
                    cand.emplace_back(jx, jy);
                } else if (floor.free(cx, cy)) {
                    cand.emplace_back(cx, cy);
                }
            }
        }
        if (static_cast<int>(cand.size()) >= k) {
            std::vector<std::pair<double, double>> out;
            const double m = static_cast<double>(cand.size());
            for (int j = 0; j < k; ++j) out.push_back(cand[static_cast<std::size_t>(std::floor(j * m / k))]);
            return out;
        }
        ++cols;
        ++rows;
    }
    throw Error(Errc::InfeasibleSpec, "obstacles leave too little room for the interior anchors");
}

Layout two_halls(const TwoHallsLayout& t, const FloorPlan& floor, std::uint64_t seed) {
    std::mt19937_64 rng(stream_seed(seed, 0, static_cast<std::uint64_t>(StreamPurpose::Layout)));
    const Halls h = halls_of(t);
    const int n_interior = static_cast<int>(std::lround(t.interior_fraction * t.anchor_count));
    const int n_perimeter = t.anchor_count - n_interior;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> z(t.z_min, t.z_max);

    std::vector<std::pair<double, double>> xy;
    if (n_perimeter > 0) {
        auto wall = along_outline(outline(h), n_perimeter, unit(rng));
        xy.insert(xy.end(), wall.begin(), wall.end());
    }
    const double area_a = h.a.area(), area_b = h.b.area();
    const int k_a = static_cast<int>(std::lround(n_interior * area_a / (area_a + area_b)));
    for (const auto& p : lattice(h.a, k_a, floor, rng)) xy.push_back(p);
    for (const auto& p : lattice(h.b, n_interior - k_a, floor, rng)) xy.push_back(p);

    Layout out;
    out.floor = floor;
    for (const auto& [x, y] : xy) out.anchors.push_back({x, y, t.z_min == t.z_max ? t.z_min : z(rng)});
    return out;
}

}  // namespace

FloorPlan floor_plan(const LayoutSpec& spec) {
    FloorPlan fp;
    std::visit(overloaded{
                   [&](const GridLayout& g) {
                       fp.regions.push_back({g.origin_x, g.origin_y, g.origin_x + g.spacing * (g.cols - 1),
                                             g.origin_y + g.spacing * (g.rows - 1)});
                   },
                   [&](const TwoHallsLayout& t) {
                       const Halls h = halls_of(t);
                       fp.regions = {h.a, h.corridor, h.b};
                       fp.obstacles = default_obstacles(t);
                   },
                   [&](const ExplicitLayout& e) {
                       if (e.area) {
                           fp.regions.push_back(*e.area);
                           return;
                       }
                       Rect r{e.anchors.at(0).x, e.anchors.at(0).y, e.anchors.at(0).x, e.anchors.at(0).y};
                       for (const auto& a : e.anchors) {
                           r.x0 = std::min(r.x0, a.x);
                           r.y0 = std::min(r.y0, a.y);
                           r.x1 = std::max(r.x1, a.x);
                           r.y1 = std::max(r.y1, a.y);
                       }
                       fp.regions.push_back(r);
                   },
               },
               spec.kind);
    if (spec.obstacles) fp.obstacles = *spec.obstacles;
    return fp;
}

Layout generate_layout(const LayoutSpec& spec, std::uint64_t seed, double coverage_range) {
    const FloorPlan floor = floor_plan(spec);
    Layout out;
    if (const auto* g = std::get_if<GridLayout>(&spec.kind)) {
        std::mt19937_64 rng(stream_seed(seed, 0, static_cast<std::uint64_t>(StreamPurpose::Layout)));
        std::uniform_real_distribution<double> z(g->z_min, g->z_max);
        out.floor = floor;
        for (int r = 0; r < g->rows; ++r) {
            for (int c = 0; c < g->cols; ++c) {
                out.anchors.push_back({g->origin_x + c * g->spacing, g->origin_y + r * g->spacing,
                                       g->z_min == g->z_max ? g->z_min : z(rng)});
            }
        }
        return out;
    }
    if (const auto* e = std::get_if<ExplicitLayout>(&spec.kind)) {
        out.floor = floor;
        out.anchors = e->anchors;
        return out;
    }
    const auto& t = std::get<TwoHallsLayout>(spec.kind);
    out = two_halls(t, floor, seed);
    if (const std::size_t bad = coverage_deficit(out, coverage_range, t.min_coverage); bad > 0) {
        throw Error(Errc::InfeasibleSpec, std::to_string(bad) + " floor points see fewer than " +
                                              std::to_string(t.min_coverage) + " anchors within " +
                                              std::to_string(coverage_range) + " m");
    }
    return out;
}

std::size_t coverage_deficit(const Layout& layout, double range, int k) {
    const Rect b = layout.floor.bounds();
    std::vector<double> qx, qy;
    for (double x = std::ceil(b.x0); x <= b.x1; x += 1.0) {
        for (double y = std::ceil(b.y0); y <= b.y1; y += 1.0) {
            if (layout.floor.free(x, y)) {
                qx.push_back(x);
                qy.push_back(y);
            }
        }
    }
    std::vector<double> ax, ay;
    for (const auto& a : layout.anchors) {
        ax.push_back(a.x);
        ay.push_back(a.y);
    }
    std::vector<int> counts(qx.size());
    kernels::count_within(ax, ay, range, qx, qy, counts);
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [&](int c) { return c < k; }));
}

std::vector<std::vector<Position3>> sample_placements(const Layout& layout, int n_tags, int n_placements,
                                                      std::uint64_t seed, double height, int max_tries) {
    if (n_tags < 0 || n_placements < 0) throw Error(Errc::InvalidArgument, "counts must be >= 0");
    const Rect b = layout.floor.bounds();
    std::vector<std::vector<Position3>> out;
    for (int p = 0; p < n_placements; ++p) {
        std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(p),
                                        static_cast<std::uint64_t>(StreamPurpose::Placement)));
        std::uniform_real_distribution<double> ux(b.x0, b.x1);
        std::uniform_real_distribution<double> uy(b.y0, b.y1);
        std::vector<Position3> tags;
        for (int t = 0; t < n_tags; ++t) {
            bool placed = false;
            for (int attempt = 0; attempt < max_tries && !placed; ++attempt) {
                const double x = ux(rng), y = uy(rng);
                if (layout.floor.free(x, y)) {
                    tags.push_back({x, y, height});
                    placed = true;
                }
            }
            if (!placed) {
                throw Error(Errc::PlacementExhausted,
                            "no free floor point found after " + std::to_string(max_tries) + " tries");
            }
        }
        out.push_back(std::move(tags));
    }
    return out;
}

std::vector<int> assign_slots(std::span<const Position3> anchors, double conflict_range) {
    std::vector<int> slot(anchors.size(), 0);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        std::set<int> taken;
        for (std::size_t j = 0; j < i; ++j) {
            if (distance(anchors[i], anchors[j]) <= conflict_range) taken.insert(slot[j]);
        }
        int s = 1;
        while (taken.count(s) != 0) ++s;
        slot[i] = s;
    }
    return slot;
}

std::vector<FlexCell> partition_cells(std::span<const Position3> anchors, int cell_size, double range) {
    if (cell_size < 1) throw Error(Errc::InvalidArgument, "cell size must be >= 1");
    std::vector<bool> used(anchors.size(), false);
    std::size_t left = anchors.size();
    std::vector<FlexCell> cells;
    while (left > 0) {
        double cx = 0.0, cy = 0.0;
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (used[i]) continue;
            cx += anchors[i].x;
            cy += anchors[i].y;
        }
        cx /= static_cast<double>(left);
        cy /= static_cast<double>(left);
        std::size_t seed_idx = anchors.size();
        double far = -1.0;
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (used[i]) continue;
            const double d = std::hypot(anchors[i].x - cx, anchors[i].y - cy);
            if (d > far + 1e-12) {
                far = d;
                seed_idx = i;
            }
        }
        std::vector<std::pair<double, std::size_t>> near;
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (used[i] || i == seed_idx) continue;
            const double d = distance(anchors[i], anchors[seed_idx]);
            if (d <= range) near.emplace_back(d, i);
        }
        std::sort(near.begin(), near.end());
        FlexCell cell;
        cell.members.push_back(seed_idx);
        for (std::size_t k = 0; k < near.size() && static_cast<int>(cell.members.size()) < cell_size; ++k) {
            cell.members.push_back(near[k].second);
        }
        // Lowest id initiates; the rest answer in id order.
        std::sort(cell.members.begin(), cell.members.end());
        for (auto i : cell.members) used[i] = true;
        left -= cell.members.size();
        cells.push_back(std::move(cell));
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::string_view to_string(TriggerProcess p) {
    switch (p) {
        case TriggerProcess::Periodic: return "periodic";
        case TriggerProcess::Jittered: return "jittered";
        case TriggerProcess::Poisson: return "poisson";
    }
    return "?";
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t node, std::uint64_t purpose) {
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ node) ^ (purpose * 0xD1B54A32D192ED03ULL));
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
    throw Error(Errc::ParseError, path + ": " + what);
}

// Object reader that records which keys were consumed so unknown ones can be
// reported by path.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) parse_fail(path_, "expected an object");
    }

    std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    void number(const char* key, double& out) {
        if (const json* v = find(key)) out = as_number(*v, at(key));
    }
    void opt_number(const char* key, std::optional<double>& out) {
        if (const json* v = find(key)) out = v->is_null() ? std::nullopt : std::optional<double>(as_number(*v, at(key)));
    }
    void integer(const char* key, int& out) {
        if (const json* v = find(key)) out = static_cast<int>(as_integer(*v, at(key)));
    }
    void opt_integer(const char* key, std::optional<int>& out) {
        if (const json* v = find(key)) {
            out = v->is_null() ? std::nullopt : std::optional<int>(static_cast<int>(as_integer(*v, at(key))));
        }
    }
    void boolean(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) parse_fail(at(key), "expected a boolean");
            out = v->get<bool>();
        }
    }
    void duration(const char* key, TimeDuration& out) {
        if (const json* v = find(key)) out = TimeDuration::from_seconds(as_number(*v, at(key)));
    }
    void pair(const char* key, double& a, double& b) {
        if (const json* v = find(key)) {
            const auto xs = numbers(*v, at(key));
            if (xs.size() != 2) parse_fail(at(key), "expected [a, b]");
            a = xs[0];
            b = xs[1];
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (used_.count(it.key()) == 0) {
                throw Error(Errc::ParseError, "unknown field '" + at(it.key().c_str()) + "'");
            }
        }
    }

    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) parse_fail(path, "expected a number");
        return v.get<double>();
    }
    static std::int64_t as_integer(const json& v, const std::string& path) {
        if (!v.is_number_integer()) parse_fail(path, "expected an integer");
        return v.get<std::int64_t>();
    }
    static std::vector<double> numbers(const json& v, const std::string& path) {
        if (!v.is_array()) parse_fail(path, "expected an array");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }
    static Position3 position(const json& v, const std::string& path) {
        const auto xs = numbers(v, path);
        if (xs.size() != 3) parse_fail(path, "expected [x, y, z]");
        return {xs[0], xs[1], xs[2]};
    }
    static std::vector<Position3> positions(const json& v, const std::string& path) {
        if (!v.is_array()) parse_fail(path, "expected an array of [x, y, z]");
        std::vector<Position3> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(position(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }
    static Rect rect(const json& v, const std::string& path) {
        Obj o(v, path);
        Rect r;
        bool have_min = false, have_max = false;
        if (o.find("min")) have_min = true;
        if (o.find("max")) have_max = true;
        if (!have_min || !have_max) parse_fail(path, "rectangle needs 'min' and 'max'");
        o.pair("min", r.x0, r.y0);
        o.pair("max", r.x1, r.y1);
        o.finish();
        return r;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void read_channel(Obj o, ScenarioConfig& c) {
    o.number("uwb_range_m", c.channel.uwb_range);
    o.number("wuc_range_m", c.channel.wuc_range);
    o.duration("uwb_frame_airtime_s", c.channel.uwb_frame_airtime);
    o.duration("wuc_airtime_s", c.channel.wuc_airtime);
    o.number("toa_noise_sigma_s", c.channel.toa_noise_sigma);
    o.number("cfo_noise_sigma", c.channel.cfo_noise_sigma);
    o.boolean("obstacles_block_radio", c.obstacles_block_radio);
    o.finish();
}

void read_clock(Obj o, ClockSpec& c) {
    o.number("max_skew_ppm", c.max_skew_ppm);
    o.number("skew_bound_ppm", c.skew_bound_ppm);
    o.number("max_offset_s", c.max_offset_s);
    o.number("drift_rate", c.drift_rate);
    o.boolean("ideal_tags", c.ideal_tags);
    o.finish();
}

void read_energy(Obj o, ScenarioConfig& c) {
    auto& e = c.energy;
    o.number("wakeup_active_j", e.wakeup_active);
    o.number("wakeup_passive_j", e.wakeup_passive);
    o.number("wakeup_anchor_j", e.wakeup_anchor);
    o.number("wakeup_reference_duration_s", e.wakeup_reference_duration);
    o.number("loc_active_base_j", e.loc_active_base);
    o.number("loc_active_step_j", e.loc_active_step);
    o.number("loc_passive_base_j", e.loc_passive_base);
    o.number("loc_passive_step_j", e.loc_passive_step);
    o.number("loc_anchor_base_j", e.loc_anchor_base);
    o.number("loc_anchor_step_j", e.loc_anchor_step);
    o.number("dur_active_base_s", e.dur_active_base);
    o.number("dur_active_step_s", e.dur_active_step);
    o.number("dur_passive_base_s", e.dur_passive_base);
    o.number("dur_passive_step_s", e.dur_passive_step);
    o.number("dur_anchor_base_s", e.dur_anchor_base);
    o.number("dur_anchor_step_s", e.dur_anchor_step);
    o.number("sleep_power_w", e.sleep_power);
    o.number("aptwr_rx_idle_power_w", e.aptwr_rx_idle_power);
    o.number("battery_capacity_wh", c.battery_capacity_wh);
    o.finish();
}

void read_solver(Obj o, SolverParams& s) {
    o.integer("n_particles", s.n_particles);
    o.number("residual_sigma_s", s.residual_sigma);
    o.integer("max_iters", s.max_iters);
    o.number("step_tolerance_m", s.step_tolerance);
    o.number("damping", s.damping);
    o.number("fixed_z_m", s.fixed_z);
    o.number("box_margin_m", s.box_margin);
    o.number("degeneracy_threshold", s.degeneracy_threshold);
    if (const json* v = o.find("dimension")) {
        if (!v->is_string()) parse_fail(o.at("dimension"), "expected \"2d\" or \"3d\"");
        const auto d = v->get<std::string>();
        if (d == "2d") {
            s.dimension = SolveDimension::TwoD;
        } else if (d == "3d") {
            s.dimension = SolveDimension::ThreeD;
        } else {
            parse_fail(o.at("dimension"), "expected \"2d\" or \"3d\"");
        }
    }
    if (const json* v = o.find("box")) {
        if (v->is_null()) {
            s.box.reset();
        } else {
            Obj b(*v, o.at("box"));
            Box box;
            if (const json* m = b.find("min")) box.min = Obj::position(*m, b.at("min"));
            if (const json* m = b.find("max")) box.max = Obj::position(*m, b.at("max"));
            b.finish();
            s.box = box;
        }
    }
    o.finish();
}

void read_protocol(Obj o, ProtocolSpec& p) {
    o.duration("first_reply_s", p.schedule.first_reply);
    o.duration("slot_gap_s", p.schedule.slot_gap);
    o.duration("wakeup_settle_s", p.schedule.wakeup_settle);
    o.number("wakeup_latency_s", p.wakeup_latency_s);
    o.number("response_guard_s", p.response_guard_s);
    o.number("solve_time_s", p.solve_time_s);
    o.integer("min_responses", p.min_responses);
    o.boolean("cfo_correction", p.cfo_correction);
    o.opt_number("aptwr_select_range_m", p.aptwr_select_range_m);
    if (const json* v = o.find("flextdoa")) {
        Obj f(*v, o.at("flextdoa"));
        f.number("period_s", p.flex_period_s);
        f.integer("cell_size", p.flex_cell_size);
        f.number("cell_stagger_s", p.flex_cell_stagger_s);
        f.number("wake_lead_s", p.flex_wake_lead_s);
        f.finish();
    }
    o.finish();
}

void read_layout(Obj o, LayoutSpec& spec) {
    std::string kind = "grid";
    if (const json* v = o.find("kind")) {
        if (!v->is_string()) parse_fail(o.at("kind"), "expected a string");
        kind = v->get<std::string>();
    }
    if (kind == "grid") {
        GridLayout g;
        o.integer("rows", g.rows);
        o.integer("cols", g.cols);
        o.number("spacing_m", g.spacing);
        o.pair("origin_m", g.origin_x, g.origin_y);
        o.pair("z_range_m", g.z_min, g.z_max);
        spec.kind = g;
    } else if (kind == "two_halls") {
        TwoHallsLayout t;
        o.pair("hall_a_m", t.hall_a_w, t.hall_a_h);
        o.pair("corridor_m", t.corridor_w, t.corridor_h);
        o.pair("hall_b_m", t.hall_b_w, t.hall_b_h);
        o.integer("anchor_count", t.anchor_count);
        o.pair("z_range_m", t.z_min, t.z_max);
        o.number("interior_fraction", t.interior_fraction);
        o.integer("min_coverage", t.min_coverage);
        spec.kind = t;
    } else if (kind == "explicit") {
        ExplicitLayout e;
        if (const json* v = o.find("anchors")) e.anchors = Obj::positions(*v, o.at("anchors"));
        if (const json* v = o.find("area")) {
            if (!v->is_null()) e.area = Obj::rect(*v, o.at("area"));
        }
        spec.kind = e;
    } else {
        parse_fail(o.at("kind"), "expected \"grid\", \"two_halls\" or \"explicit\"");
    }
    if (const json* v = o.find("obstacles")) {
        if (v->is_null()) {
            spec.obstacles.reset();
        } else {
            if (!v->is_array()) parse_fail(o.at("obstacles"), "expected an array");
            std::vector<Rect> rs;
            for (std::size_t i = 0; i < v->size(); ++i) {
                rs.push_back(Obj::rect((*v)[i], o.at("obstacles") + "[" + std::to_string(i) + "]"));
            }
            spec.obstacles = rs;
        }
    }
    o.finish();
}

void read_tags(Obj o, TagSpec& t) {
    o.integer("count", t.count);
    o.number("height_m", t.height_m);
    o.integer("placements", t.placements);
    if (const json* v = o.find("positions")) {
        if (v->is_null()) {
            t.positions.reset();
        } else {
            t.positions = Obj::positions(*v, o.at("positions"));
        }
    }
    o.finish();
}

void read_localization(Obj o, LocalizationSpec& l) {
    o.number("period_s", l.period_s);
    o.opt_integer("rounds_per_tag", l.rounds_per_tag);
    o.number("jitter", l.jitter);
    o.number("start_s", l.start_s);
    if (const json* v = o.find("trigger_process")) {
        const std::string s = v->is_string() ? v->get<std::string>() : "";
        if (s == "periodic") {
            l.process = TriggerProcess::Periodic;
        } else if (s == "jittered") {
            l.process = TriggerProcess::Jittered;
        } else if (s == "poisson") {
            l.process = TriggerProcess::Poisson;
        } else {
            parse_fail(o.at("trigger_process"), "expected \"periodic\", \"jittered\" or \"poisson\"");
        }
    }
    o.finish();
}

void read_output(Obj o, OutputSpec& out) {
    o.boolean("trace", out.trace);
    o.boolean("measurements", out.measurements);
    o.finish();
}

void read_sweep(Obj o, SweepSpec& s) {
    if (const json* v = o.find("periods_s")) s.periods_s = Obj::numbers(*v, o.at("periods_s"));
    if (const json* v = o.find("tag_counts")) {
        if (!v->is_array()) parse_fail(o.at("tag_counts"), "expected an array");
        s.tag_counts.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            s.tag_counts.push_back(
                static_cast<int>(Obj::as_integer((*v)[i], o.at("tag_counts") + "[" + std::to_string(i) + "]")));
        }
    }
    o.finish();
}

json pos_json(const Position3& p) {
    return json::array({p.x, p.y, p.z});
}

json rect_json(const Rect& r) {
    return {{"min", {r.x0, r.y0}}, {"max", {r.x1, r.y1}}};
}

void check_layout(const LayoutSpec& spec, std::vector<std::string>& v) {
    std::visit(overloaded{
                   [&](const GridLayout& g) {
                       if (g.rows < 1 || g.cols < 1) v.emplace_back("layout: grid needs rows, cols >= 1 (zero anchors)");
                       if (!(g.spacing > 0.0)) v.emplace_back("layout.spacing_m must be > 0");
                       if (!(g.z_min <= g.z_max)) v.emplace_back("layout.z_range_m must be [low, high]");
                   },
                   [&](const TwoHallsLayout& t) {
                       if (t.anchor_count < 1) v.emplace_back("layout.anchor_count must be >= 1 (zero anchors)");
                       for (double d : {t.hall_a_w, t.hall_a_h, t.corridor_w, t.corridor_h, t.hall_b_w, t.hall_b_h}) {
                           if (!(d > 0.0)) {
                               v.emplace_back("layout: hall and corridor dimensions must be > 0");
                               break;
                           }
                       }
                       if (t.corridor_h > std::min(t.hall_a_h, t.hall_b_h)) {
                           v.emplace_back("layout: corridor must be narrower than both halls");
                       }
                       if (!(t.z_min <= t.z_max)) v.emplace_back("layout.z_range_m must be [low, high]");
                       if (!(t.interior_fraction >= 0.0 && t.interior_fraction < 1.0)) {
                           v.emplace_back("layout.interior_fraction must be in [0, 1)");
                       }
                       if (t.min_coverage < 0) v.emplace_back("layout.min_coverage must be >= 0");
                   },
                   [&](const ExplicitLayout& e) {
                       if (e.anchors.empty()) v.emplace_back("layout.anchors must not be empty (zero anchors)");
                       for (const auto& a : e.anchors) {
                           if (!a.finite()) {
                               v.emplace_back("layout.anchors must be finite");
                               break;
                           }
                       }
                       if (e.area && !(e.area->area() > 0.0)) v.emplace_back("layout.area must have positive area");
                   },
               },
               spec.kind);
    if (spec.obstacles) {
        for (const auto& r : *spec.obstacles) {
            if (!(r.x1 > r.x0 && r.y1 > r.y0)) {
                v.emplace_back("layout.obstacles entries need max > min");
                break;
            }
        }
    }
}

}  // namespace

std::vector<std::string> ScenarioConfig::violations() const {
    std::vector<std::string> v;
    if (schema_version != kSchemaVersion) {
        v.push_back("schema_version must be " + std::to_string(kSchemaVersion));
    }
    for (auto& s : channel.violations()) v.push_back(std::move(s));
    if (!(clock.max_skew_ppm >= 0.0 && clock.max_skew_ppm <= clock.skew_bound_ppm)) {
        v.emplace_back("clock.max_skew_ppm must be in [0, clock.skew_bound_ppm]");
    }
    if (!(clock.max_offset_s >= 0.0)) v.emplace_back("clock.max_offset_s must be >= 0");
    if (!std::isfinite(clock.drift_rate)) v.emplace_back("clock.drift_rate must be finite");
    for (auto& s : energy.violations()) v.push_back(std::move(s));
    if (!(battery_capacity_wh > 0.0)) v.emplace_back("energy.battery_capacity_wh must be > 0");
    for (auto& s : solver.violations()) v.push_back(std::move(s));

    const auto& p = protocol;
    if (p.schedule.first_reply <= channel.uwb_frame_airtime) {
        v.emplace_back("protocol.first_reply_s must exceed the UWB frame airtime");
    }
    if (p.schedule.slot_gap < channel.uwb_frame_airtime) {
        v.emplace_back("protocol.slot_gap_s must be >= channel.uwb_frame_airtime_s");
    }
    if (p.schedule.wakeup_settle.count() <= 0) v.emplace_back("protocol.wakeup_settle_s must be > 0");
    if (!(p.wakeup_latency_s > 0.0)) v.emplace_back("protocol.wakeup_latency_s must be > 0");
    if (p.wakeup_latency_s >= p.schedule.wakeup_settle.to_seconds()) {
        v.emplace_back("protocol.wakeup_latency_s must be shorter than protocol.wakeup_settle_s");
    }
    if (!(p.response_guard_s >= 0.0)) v.emplace_back("protocol.response_guard_s must be >= 0");
    if (!(p.solve_time_s >= 0.0)) v.emplace_back("protocol.solve_time_s must be >= 0");
    if (p.min_responses < 1) v.emplace_back("protocol.min_responses must be >= 1");
    if (p.aptwr_select_range_m && !(*p.aptwr_select_range_m > 0.0)) {
        v.emplace_back("protocol.aptwr_select_range_m must be > 0");
    }
    if (!(p.flex_period_s >= kMinLocalizationPeriod)) {
        v.emplace_back("protocol.flextdoa.period_s must be >= 0.060 s (minimal localization period)");
    }
    if (p.flex_cell_size < 2) v.emplace_back("protocol.flextdoa.cell_size must be >= 2");
    if (!(p.flex_cell_stagger_s > 0.0)) v.emplace_back("protocol.flextdoa.cell_stagger_s must be > 0");
    if (!(p.flex_wake_lead_s > 0.0)) v.emplace_back("protocol.flextdoa.wake_lead_s must be > 0");

    check_layout(layout, v);

    if (tags.count < 0) v.emplace_back("tags.count must be >= 0");
    if (tags.placements < 1) v.emplace_back("tags.placements must be >= 1");
    if (!std::isfinite(tags.height_m)) v.emplace_back("tags.height_m must be finite");
    if (tags.positions) {
        if (static_cast<int>(tags.positions->size()) != tags.count) {
            v.emplace_back("tags.positions must list exactly tags.count positions");
        }
        if (tags.placements != 1) v.emplace_back("tags.placements must be 1 with fixed tags.positions");
    }

    const auto& l = localization;
    if (!(l.period_s >= kMinLocalizationPeriod)) {
        v.emplace_back("localization.period_s must be >= 0.060 s (minimal localization period)");
    }
    if (l.rounds_per_tag && *l.rounds_per_tag < 1) v.emplace_back("localization.rounds_per_tag must be >= 1");
    if (!(l.jitter >= 0.0 && l.jitter < 1.0)) v.emplace_back("localization.jitter must be in [0, 1)");
    if (!(l.start_s >= 0.0)) v.emplace_back("localization.start_s must be >= 0");

    if (horizon_s) {
        if (!(*horizon_s > 0.0) || *horizon_s > 1e6) v.emplace_back("horizon_s must be in (0, 1e6]");
    } else if (!l.rounds_per_tag) {
        v.emplace_back("horizon_s is required when localization.rounds_per_tag is absent");
    }

    for (double s : sweep.periods_s) {
        if (!(s >= kMinLocalizationPeriod)) {
            v.emplace_back("sweep.periods_s entries must be >= 0.060 s (minimal localization period)");
            break;
        }
    }
    for (int n : sweep.tag_counts) {
        if (n < 0) {
            v.emplace_back("sweep.tag_counts entries must be >= 0");
            break;
        }
    }
    return v;
}

void validate(const ScenarioConfig& config) {
    auto v = config.violations();
    if (!v.empty()) {
        std::string msg = "invalid configuration: " + v.front();
        if (v.size() > 1) msg += " (+" + std::to_string(v.size() - 1) + " more)";
        throw Error(Errc::ValidationError, msg, std::move(v));
    }
}

ScenarioConfig load_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, std::string("malformed JSON: ") + e.what());
    }
    ScenarioConfig c;
    Obj root(j, "");
    if (const json* v = root.find("schema_version")) c.schema_version = static_cast<int>(Obj::as_integer(*v, "schema_version"));
    if (const json* v = root.find("scheme")) {
        if (!v->is_string()) parse_fail("scheme", "expected a string");
        try {
            c.scheme = parse_scheme(v->get<std::string>());
        } catch (const Error& e) {
            parse_fail("scheme", e.what());
        }
    }
    if (const json* v = root.find("seed")) {
        if (!v->is_number_unsigned()) parse_fail("seed", "expected a non-negative integer");
        c.seed = v->get<std::uint64_t>();
    }
    root.opt_number("horizon_s", c.horizon_s);
    if (const json* v = root.find("channel")) read_channel(Obj(*v, "channel"), c);
    if (const json* v = root.find("clock")) read_clock(Obj(*v, "clock"), c.clock);
    if (const json* v = root.find("energy")) read_energy(Obj(*v, "energy"), c);
    if (const json* v = root.find("solver")) read_solver(Obj(*v, "solver"), c.solver);
    if (const json* v = root.find("protocol")) read_protocol(Obj(*v, "protocol"), c.protocol);
    if (const json* v = root.find("layout")) read_layout(Obj(*v, "layout"), c.layout);
    if (const json* v = root.find("tags")) read_tags(Obj(*v, "tags"), c.tags);
    if (const json* v = root.find("localization")) read_localization(Obj(*v, "localization"), c.localization);
    if (const json* v = root.find("output")) read_output(Obj(*v, "output"), c.output);
    if (const json* v = root.find("sweep")) read_sweep(Obj(*v, "sweep"), c.sweep);
    root.finish();
    validate(c);
    return c;
}

ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["scheme"] = std::string(to_string(c.scheme));
    j["seed"] = c.seed;
    j["horizon_s"] = c.horizon_s ? json(*c.horizon_s) : json(nullptr);
    j["channel"] = {
        {"uwb_range_m", c.channel.uwb_range},
        {"wuc_range_m", c.channel.wuc_range},
        {"uwb_frame_airtime_s", c.channel.uwb_frame_airtime.to_seconds()},
        {"wuc_airtime_s", c.channel.wuc_airtime.to_seconds()},
        {"toa_noise_sigma_s", c.channel.toa_noise_sigma},
        {"cfo_noise_sigma", c.channel.cfo_noise_sigma},
        {"obstacles_block_radio", c.obstacles_block_radio},
    };
    j["clock"] = {
        {"max_skew_ppm", c.clock.max_skew_ppm}, {"skew_bound_ppm", c.clock.skew_bound_ppm},
        {"max_offset_s", c.clock.max_offset_s}, {"drift_rate", c.clock.drift_rate},
        {"ideal_tags", c.clock.ideal_tags},
    };
    const auto& e = c.energy;
    j["energy"] = {
        {"wakeup_active_j", e.wakeup_active},
        {"wakeup_passive_j", e.wakeup_passive},
        {"wakeup_anchor_j", e.wakeup_anchor},
        {"wakeup_reference_duration_s", e.wakeup_reference_duration},
        {"loc_active_base_j", e.loc_active_base},
        {"loc_active_step_j", e.loc_active_step},
        {"loc_passive_base_j", e.loc_passive_base},
        {"loc_passive_step_j", e.loc_passive_step},
        {"loc_anchor_base_j", e.loc_anchor_base},
        {"loc_anchor_step_j", e.loc_anchor_step},
        {"dur_active_base_s", e.dur_active_base},
        {"dur_active_step_s", e.dur_active_step},
        {"dur_passive_base_s", e.dur_passive_base},
        {"dur_passive_step_s", e.dur_passive_step},
        {"dur_anchor_base_s", e.dur_anchor_base},
        {"dur_anchor_step_s", e.dur_anchor_step},
        {"sleep_power_w", e.sleep_power},
        {"aptwr_rx_idle_power_w", e.aptwr_rx_idle_power},
        {"battery_capacity_wh", c.battery_capacity_wh},
    };
    const auto& s = c.solver;
    j["solver"] = {
        {"n_particles", s.n_particles},
        {"residual_sigma_s", s.residual_sigma},
        {"max_iters", s.max_iters},
        {"step_tolerance_m", s.step_tolerance},
        {"damping", s.damping},
        {"dimension", std::string(to_string(s.dimension))},
        {"fixed_z_m", s.fixed_z},
        {"box_margin_m", s.box_margin},
        {"degeneracy_threshold", s.degeneracy_threshold},
        {"box", s.box ? json{{"min", pos_json(s.box->min)}, {"max", pos_json(s.box->max)}} : json(nullptr)},
    };
    const auto& p = c.protocol;
    j["protocol"] = {
        {"first_reply_s", p.schedule.first_reply.to_seconds()},
        {"slot_gap_s", p.schedule.slot_gap.to_seconds()},
        {"wakeup_settle_s", p.schedule.wakeup_settle.to_seconds()},
        {"wakeup_latency_s", p.wakeup_latency_s},
        {"response_guard_s", p.response_guard_s},
        {"solve_time_s", p.solve_time_s},
        {"min_responses", p.min_responses},
        {"cfo_correction", p.cfo_correction},
        {"aptwr_select_range_m", p.aptwr_select_range_m ? json(*p.aptwr_select_range_m) : json(nullptr)},
        {"flextdoa",
         {{"period_s", p.flex_period_s},
          {"cell_size", p.flex_cell_size},
          {"cell_stagger_s", p.flex_cell_stagger_s},
          {"wake_lead_s", p.flex_wake_lead_s}}},
    };
    json layout;
    std::visit(overloaded{
                   [&](const GridLayout& g) {
                       layout = {{"kind", "grid"},         {"rows", g.rows},
                                 {"cols", g.cols},         {"spacing_m", g.spacing},
                                 {"origin_m", {g.origin_x, g.origin_y}}, {"z_range_m", {g.z_min, g.z_max}}};
                   },
                   [&](const TwoHallsLayout& t) {
                       layout = {{"kind", "two_halls"},
                                 {"hall_a_m", {t.hall_a_w, t.hall_a_h}},
                                 {"corridor_m", {t.corridor_w, t.corridor_h}},
                                 {"hall_b_m", {t.hall_b_w, t.hall_b_h}},
                                 {"anchor_count", t.anchor_count},
                                 {"z_range_m", {t.z_min, t.z_max}},
                                 {"interior_fraction", t.interior_fraction},
                                 {"min_coverage", t.min_coverage}};
                   },
                   [&](const ExplicitLayout& ex) {
                       json anchors = json::array();
                       for (const auto& a : ex.anchors) anchors.push_back(pos_json(a));
                       layout = {{"kind", "explicit"}, {"anchors", anchors},
                                 {"area", ex.area ? rect_json(*ex.area) : json(nullptr)}};
                   },
               },
               c.layout.kind);
    if (c.layout.obstacles) {
        json obs = json::array();
        for (const auto& r : *c.layout.obstacles) obs.push_back(rect_json(r));
        layout["obstacles"] = obs;
    } else {
        layout["obstacles"] = nullptr;
    }
    j["layout"] = layout;
    json positions = nullptr;
    if (c.tags.positions) {
        positions = json::array();
        for (const auto& t : *c.tags.positions) positions.push_back(pos_json(t));
    }
    j["tags"] = {{"count", c.tags.count},
                 {"height_m", c.tags.height_m},
                 {"placements", c.tags.placements},
                 {"positions", positions}};
    j["localization"] = {
        {"period_s", c.localization.period_s},
        {"rounds_per_tag", c.localization.rounds_per_tag ? json(*c.localization.rounds_per_tag) : json(nullptr)},
        {"trigger_process", std::string(to_string(c.localization.process))},
        {"jitter", c.localization.jitter},
        {"start_s", c.localization.start_s},
    };
    j["output"] = {{"trace", c.output.trace}, {"measurements", c.output.measurements}};
    j["sweep"] = {{"periods_s", c.sweep.periods_s}, {"tag_counts", c.sweep.tag_counts}};
    return j.dump(2) + "\n";
}

ProtocolContext make_protocol_context(const ScenarioConfig& c, const Layout&, std::span<const int> slots,
                                      int n_cells) {
    ProtocolContext ctx;
    ctx.scheme = c.scheme;
    ctx.schedule = c.protocol.schedule;
    ctx.uwb_airtime = c.channel.uwb_frame_airtime;
    ctx.wuc_airtime = c.channel.wuc_airtime;
    ctx.wakeup_latency = TimeDuration::from_seconds(c.protocol.wakeup_latency_s);
    ctx.response_guard = TimeDuration::from_seconds(c.protocol.response_guard_s);
    ctx.solve_time = TimeDuration::from_seconds(c.protocol.solve_time_s);
    ctx.min_responses = c.protocol.min_responses;
    ctx.max_slot = slots.empty() ? 1 : *std::max_element(slots.begin(), slots.end());
    ctx.n_bound = c.scheme == Scheme::FlexTdoa ? c.protocol.flex_cell_size : ctx.max_slot;
    ctx.energy = c.energy;
    ctx.solver = c.solver;
    ctx.twr.cfo_correction = c.protocol.cfo_correction;
    ctx.twr.implausible_range = 2.0 * c.channel.uwb_range;
    ctx.flex.period = TimeDuration::from_seconds(c.protocol.flex_period_s);
    ctx.flex.cell_stagger = TimeDuration::from_seconds(c.protocol.flex_cell_stagger_s);
    ctx.flex.wake_lead = TimeDuration::from_seconds(c.protocol.flex_wake_lead_s);
    ctx.flex.cell_size = c.protocol.flex_cell_size;
    ctx.flex.n_cells = std::max(n_cells, 1);
    return ctx;
}

}  // namespace wakeloc
