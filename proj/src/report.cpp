#include "wakeloc/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace wakeloc {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

AxisStats axis(std::vector<double> v) {
    AxisStats s;
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    s.avg = sum / n;
    double sq = 0.0;
    for (double x : v) sq += (x - s.avg) * (x - s.avg);
    s.std = std::sqrt(sq / n);
    std::sort(v.begin(), v.end());
    s.median = v[(v.size() - 1) / 2];
    return s;
}

std::string cm(double m) {
    return format_double(m * 100.0);
}

}  // namespace

ErrorStats error_stats(std::span<const std::pair<Position3, Position3>> pairs) {
    if (pairs.empty()) throw Error(Errc::EmptyInput, "no successful localizations");
    std::vector<double> dx, dy, dz, d2, d3;
    for (const auto& [est, truth] : pairs) {
        const Position3 e = est - truth;
        dx.push_back(e.x);
        dy.push_back(e.y);
        dz.push_back(e.z);
        d2.push_back(std::hypot(e.x, e.y));
        d3.push_back(std::sqrt(e.x * e.x + e.y * e.y + e.z * e.z));
    }
    ErrorStats s;
    s.n = pairs.size();
    s.x = axis(std::move(dx));
    s.y = axis(std::move(dy));
    s.z = axis(std::move(dz));
    s.d2 = axis(std::move(d2));
    s.d3 = axis(std::move(d3));
    return s;
}

std::vector<AccuracyRow> accuracy_rows(Scheme scheme, std::span<const LocalizationOutcome> outcomes) {
    std::map<OutcomeMode, std::vector<const LocalizationOutcome*>> by_mode;
    for (const auto& o : outcomes) {
        if (o.failure == FailureReason::Truncated) continue;
        by_mode[o.mode].push_back(&o);
    }
    std::vector<AccuracyRow> rows;
    for (const auto& [mode, list] : by_mode) {
        AccuracyRow r;
        r.scheme = scheme;
        r.mode = mode;
        std::vector<std::pair<Position3, Position3>> pairs;
        for (const auto* o : list) {
            ++r.attempts;
            if (o->success() && o->truth) {
                pairs.emplace_back(*o->estimate, *o->truth);
            } else {
                ++r.failures;
            }
        }
        if (!pairs.empty()) r.stats = error_stats(pairs);
        rows.push_back(r);
    }
    return rows;
}

PowerSample power_sample(const SimulationTrace& trace, std::size_t n_anchors, double period_s, int placement) {
    PowerSample s;
    s.scheme = trace.scheme;
    s.period_s = period_s;
    s.placement = placement;
    s.n_tags = static_cast<int>(trace.ledgers.size() - n_anchors);
    double a = 0.0, t = 0.0;
    for (std::size_t i = 0; i < trace.ledgers.size(); ++i) {
        (i < n_anchors ? a : t) += average_power(trace.ledgers[i]);
    }
    s.anchor_power_w = n_anchors > 0 ? a / static_cast<double>(n_anchors) : std::numeric_limits<double>::quiet_NaN();
    s.tag_power_w = s.n_tags > 0 ? t / s.n_tags : std::numeric_limits<double>::quiet_NaN();
    return s;
}

std::vector<PowerCurvePoint> power_curve(std::span<const PowerSample> samples) {
    using Key = std::tuple<int, double, int>;
    std::map<Key, std::vector<const PowerSample*>> groups;
    for (const auto& s : samples) groups[{static_cast<int>(s.scheme), s.period_s, s.n_tags}].push_back(&s);
    std::vector<PowerCurvePoint> out;
    for (const auto& [key, list] : groups) {
        PowerCurvePoint p;
        p.scheme = static_cast<Scheme>(std::get<0>(key));
        p.period_s = std::get<1>(key);
        p.n_tags = std::get<2>(key);
        p.placements = list.size();
        p.anchor_min_w = p.tag_min_w = std::numeric_limits<double>::infinity();
        p.anchor_max_w = p.tag_max_w = -std::numeric_limits<double>::infinity();
        for (const auto* s : list) {
            p.anchor_mean_w += s->anchor_power_w;
            p.tag_mean_w += s->tag_power_w;
            p.anchor_min_w = std::min(p.anchor_min_w, s->anchor_power_w);
            p.anchor_max_w = std::max(p.anchor_max_w, s->anchor_power_w);
            p.tag_min_w = std::min(p.tag_min_w, s->tag_power_w);
            p.tag_max_w = std::max(p.tag_max_w, s->tag_power_w);
        }
        p.anchor_mean_w /= static_cast<double>(list.size());
        p.tag_mean_w /= static_cast<double>(list.size());
        if (p.n_tags == 0) p.tag_mean_w = p.tag_min_w = p.tag_max_w = std::numeric_limits<double>::quiet_NaN();
        out.push_back(p);
    }
    return out;
}

std::vector<LatencyRow> latency_rows(Scheme scheme, std::span<const LocalizationOutcome> outcomes) {
    std::vector<LatencyRow> rows;
    for (const auto& o : outcomes) {
        if (!o.success() || o.mode == OutcomeMode::Passive) continue;
        rows.push_back({scheme, o.n_responses_used, o.latency.to_seconds()});
    }
    return rows;
}

std::string accuracy_csv(std::span<const AccuracyRow> rows) {
    std::string out =
        "scheme,mode,n,avg_x_cm,md_x_cm,sd_x_cm,avg_y_cm,md_y_cm,sd_y_cm,avg_z_cm,md_z_cm,sd_z_cm,"
        "avg_2d_cm,md_2d_cm,sd_2d_cm,avg_3d_cm,md_3d_cm,sd_3d_cm,fail_rate\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.scheme)) + "," + std::string(to_string(r.mode)) + ",";
        out += std::to_string(r.stats ? r.stats->n : 0);
        if (r.stats) {
            for (const AxisStats* a : {&r.stats->x, &r.stats->y, &r.stats->z, &r.stats->d2, &r.stats->d3}) {
                out += "," + cm(a->avg) + "," + cm(a->median) + "," + cm(a->std);
            }
        } else {
            out += ",,,,,,,,,,,,,,,";
        }
        out += "," + format_double(r.fail_rate()) + "\n";
    }
    return out;
}

std::string power_csv(std::span<const PowerSample> samples) {
    std::string out = "scheme,period_s,n_tags,placement,anchor_power_w,tag_power_w\n";
    for (const auto& s : samples) {
        out += std::string(to_string(s.scheme)) + "," + format_double(s.period_s) + "," + std::to_string(s.n_tags) +
               "," + std::to_string(s.placement) + "," + format_double(s.anchor_power_w) + "," +
               format_double(s.tag_power_w) + "\n";
    }
    return out;
}

std::string power_curve_csv(std::span<const PowerCurvePoint> points) {
    std::string out =
        "scheme,period_s,n_tags,placements,anchor_mean_w,anchor_min_w,anchor_max_w,tag_mean_w,tag_min_w,tag_max_w\n";
    for (const auto& p : points) {
        out += std::string(to_string(p.scheme)) + "," + format_double(p.period_s) + "," + std::to_string(p.n_tags) +
               "," + std::to_string(p.placements) + "," + format_double(p.anchor_mean_w) + "," +
               format_double(p.anchor_min_w) + "," + format_double(p.anchor_max_w) + "," +
               format_double(p.tag_mean_w) + "," + format_double(p.tag_min_w) + "," + format_double(p.tag_max_w) +
               "\n";
    }
    return out;
}

std::string latency_csv(std::span<const LatencyRow> rows) {
    std::string out = "scheme,n_anchors,latency_s\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.scheme)) + "," + std::to_string(r.n_anchors) + "," + format_double(r.latency_s) +
               "\n";
    }
    return out;
}

std::string layout_csv(const Deployment& d) {
    std::string out = "id,x,y,z,role\n";
    for (const auto& n : d.nodes) {
        out += std::to_string(n.id.value) + "," + format_double(n.position.x) + "," + format_double(n.position.y) +
               "," + format_double(n.position.z) + "," + (n.role == NodeRole::Anchor ? "anchor" : "tag") + "\n";
    }
    return out;
}

}  // namespace wakeloc
