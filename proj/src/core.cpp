#include "wakeloc/core.hpp"

#include <cmath>
#include <limits>

namespace wakeloc {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::ImplausibleRange: return "ImplausibleRange";
        case Errc::DegenerateGeometry: return "DegenerateGeometry";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::MissingReference: return "MissingReference";
        case Errc::AllWeightsZero: return "AllWeightsZero";
        case Errc::OverlappingIntervals: return "OverlappingIntervals";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::ParseError: return "ParseError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::InfeasibleSpec: return "InfeasibleSpec";
        case Errc::PlacementExhausted: return "PlacementExhausted";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message, std::vector<std::string> details)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), details_(std::move(details)) {}

Position3 Position3::checked(double x, double y, double z) {
    Position3 p{x, y, z};
    if (!p.finite()) throw Error(Errc::InvalidArgument, "position coordinates must be finite");
    return p;
}

double distance(const Position3& a, const Position3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double horizontal_distance(const Position3& a, const Position3& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

TimeDuration TimeDuration::from_seconds(double s) {
    const double ps = s * static_cast<double>(kPicosPerSecond);
    if (!std::isfinite(ps) || std::fabs(ps) > 9.0e18) {
        throw Error(Errc::InvalidArgument, "duration out of range");
    }
    return TimeDuration(std::llround(ps));
}

Timestamp Timestamp::from_parts(std::int64_t whole_ps, double extra_ps) {
    const double shift = std::floor(extra_ps + 0.5);
    Timestamp t;
    t.ps = whole_ps + static_cast<std::int64_t>(shift);
    t.frac_ps = extra_ps - shift;
    return t;
}

double Timestamp::to_seconds() const {
    return (static_cast<double>(ps) + frac_ps) / static_cast<double>(kPicosPerSecond);
}

Timestamp Timestamp::plus_ps(double delta_ps) const {
    const double whole = std::trunc(delta_ps);
    return from_parts(ps + static_cast<std::int64_t>(whole), frac_ps + (delta_ps - whole));
}

Timestamp Timestamp::plus_seconds(double s) const {
    return plus_ps(s * static_cast<double>(kPicosPerSecond));
}

double picos_between(const Timestamp& a, const Timestamp& b) {
    return static_cast<double>(a.ps - b.ps) + (a.frac_ps - b.frac_ps);
}

double seconds_between(const Timestamp& a, const Timestamp& b) {
    return picos_between(a, b) / static_cast<double>(kPicosPerSecond);
}

std::string_view to_string(NodeRole role) {
    return role == NodeRole::Anchor ? "anchor" : "tag";
}

std::string_view kind_name(const MessageKind& kind) {
    struct Visitor {
        std::string_view operator()(const msg::WakeUpCall&) const { return "wuc"; }
        std::string_view operator()(const msg::Poll&) const { return "poll"; }
        std::string_view operator()(const msg::Response&) const { return "response"; }
        std::string_view operator()(const msg::FinalBroadcast&) const { return "final"; }
        std::string_view operator()(const msg::FlexInit&) const { return "flex_init"; }
        std::string_view operator()(const msg::FlexResponse&) const { return "flex_response"; }
    };
    return std::visit(Visitor{}, kind);
}

}  // namespace wakeloc
