#include "wakeloc/replay.hpp"

#include <charconv>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "wakeloc/report.hpp"
#include "wakeloc/scenario.hpp"

namespace wakeloc {

namespace {

constexpr std::string_view kHeader = "round,receiver,kind,anchor_index,x,y,z,t_ps,t_frac_ps,cfo,reply_s,reply_nominal_s";

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <class T>
T field(std::string_view s, std::size_t line, const char* name) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(Errc::ParseError, "measurements line " + std::to_string(line) + ": bad " + name + " '" +
                                          std::string(s) + "'");
    }
    return v;
}

}  // namespace

std::vector<MeasurementRow> measurement_rows(std::span<const LocalizationOutcome> outcomes) {
    std::vector<MeasurementRow> rows;
    for (const auto& o : outcomes) {
        for (const auto& m : o.twr) {
            MeasurementRow r;
            r.round = o.round;
            r.receiver = o.node.value;
            r.kind = "twr";
            r.position = m.anchor_position;
            const double ps = m.t_round_local * static_cast<double>(kPicosPerSecond);
            r.t_ps = static_cast<std::int64_t>(std::llround(ps));
            r.t_frac_ps = ps - static_cast<double>(r.t_ps);
            r.cfo = m.cfo;
            r.reply_s = m.t_reply_reported.value_or(m.t_reply_nominal);
            r.reply_nominal_s = m.t_reply_nominal;
            rows.push_back(r);
        }
        for (const auto& m : o.tdoa) {
            MeasurementRow r;
            r.round = o.round;
            r.receiver = o.node.value;
            r.kind = m.reference ? "tdoa_ref" : "tdoa";
            r.anchor_index = m.anchor_index;
            r.position = m.reference ? m.initiator_position : m.anchor_position;
            r.t_ps = m.t_arrival_local.ps;
            r.t_frac_ps = m.t_arrival_local.frac_ps;
            r.cfo = m.cfo;
            r.reply_s = m.delta_t;
            rows.push_back(r);
        }
    }
    return rows;
}

std::string measurements_csv(std::span<const MeasurementRow> rows) {
    std::string out(kHeader);
    out += "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.round) + "," + std::to_string(r.receiver) + "," + r.kind + "," +
               std::to_string(r.anchor_index) + "," + format_double(r.position.x) + "," + format_double(r.position.y) +
               "," + format_double(r.position.z) + "," + std::to_string(r.t_ps) + "," + format_double(r.t_frac_ps) +
               "," + format_double(r.cfo) + "," + format_double(r.reply_s) + "," + format_double(r.reply_nominal_s) +
               "\n";
    }
    return out;
}

std::vector<MeasurementRow> parse_measurements_csv(std::string_view text) {
    std::vector<MeasurementRow> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (header) {
            if (line != kHeader) throw Error(Errc::ParseError, "measurements line 1: unexpected header");
            header = false;
            continue;
        }
        const auto f = split(line);
        if (f.size() != 12) {
            throw Error(Errc::ParseError, "measurements line " + std::to_string(line_no) + ": expected 12 fields");
        }
        MeasurementRow r;
        r.round = field<std::uint64_t>(f[0], line_no, "round");
        r.receiver = field<std::uint32_t>(f[1], line_no, "receiver");
        r.kind = std::string(f[2]);
        if (r.kind != "twr" && r.kind != "tdoa" && r.kind != "tdoa_ref") {
            throw Error(Errc::ParseError, "measurements line " + std::to_string(line_no) + ": unknown kind '" + r.kind + "'");
        }
        r.anchor_index = field<int>(f[3], line_no, "anchor_index");
        r.position = {field<double>(f[4], line_no, "x"), field<double>(f[5], line_no, "y"),
                      field<double>(f[6], line_no, "z")};
        r.t_ps = field<std::int64_t>(f[7], line_no, "t_ps");
        r.t_frac_ps = field<double>(f[8], line_no, "t_frac_ps");
        r.cfo = field<double>(f[9], line_no, "cfo");
        r.reply_s = field<double>(f[10], line_no, "reply_s");
        r.reply_nominal_s = field<double>(f[11], line_no, "reply_nominal_s");
        rows.push_back(std::move(r));
    }
    if (header) throw Error(Errc::ParseError, "measurements file is empty");
    return rows;
}

std::vector<OfflineEstimate> solve_measurements(std::span<const MeasurementRow> rows, const SolverParams& solver,
                                                const TwrOptions& twr, std::uint64_t seed) {
    using Key = std::tuple<std::uint64_t, std::uint32_t, std::string>;
    std::map<Key, std::vector<const MeasurementRow*>> groups;
    for (const auto& r : rows) groups[{r.round, r.receiver, r.kind == "twr" ? "twr" : "tdoa"}].push_back(&r);

    std::vector<OfflineEstimate> out;
    for (const auto& [key, list] : groups) {
        OfflineEstimate e;
        e.round = std::get<0>(key);
        e.receiver = std::get<1>(key);
        e.method = std::get<2>(key);
        try {
            if (e.method == "twr") {
                std::vector<RangeObservation> obs;
                for (const auto* r : list) {
                    TwrMeasurement m;
                    m.anchor_position = r->position;
                    m.t_round_local = (static_cast<double>(r->t_ps) + r->t_frac_ps) / static_cast<double>(kPicosPerSecond);
                    m.t_reply_nominal = r->reply_nominal_s;
                    m.t_reply_reported = r->reply_s;
                    m.cfo = r->cfo;
                    obs.push_back({r->position, cc_ss_twr_range(m, twr)});
                }
                e.position = trilaterate(obs, solver).position;
            } else {
                const MeasurementRow* ref = nullptr;
                for (const auto* r : list) {
                    if (r->kind == "tdoa_ref") ref = r;
                }
                if (!ref) throw Error(Errc::MissingReference, "no tdoa_ref row");
                std::vector<TdoaMeasurement> ms;
                for (const auto* r : list) {
                    TdoaMeasurement m;
                    m.anchor_index = r->anchor_index;
                    m.anchor_position = r->position;
                    m.initiator_position = ref->position;
                    m.delta_t = r->reply_s;
                    m.cfo = r->cfo;
                    m.t_arrival_local = Timestamp::from_parts(r->t_ps, r->t_frac_ps);
                    m.reference = r == ref;
                    ms.push_back(m);
                }
                std::mt19937_64 rng(stream_seed(seed, e.round, e.receiver));
                e.position = particle_filter_solve(ms, solver, rng).position;
            }
            e.status = "ok";
        } catch (const Error& err) {
            e.status = std::string(to_string(err.code()));
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string estimates_csv(std::span<const OfflineEstimate> estimates) {
    std::string out = "round,receiver,method,x,y,z,status\n";
    for (const auto& e : estimates) {
        out += std::to_string(e.round) + "," + std::to_string(e.receiver) + "," + e.method + ",";
        if (e.position) {
            out += format_double(e.position->x) + "," + format_double(e.position->y) + "," +
                   format_double(e.position->z);
        } else {
            out += ",,";
        }
        out += "," + e.status + "\n";
    }
    return out;
}

}  // namespace wakeloc
