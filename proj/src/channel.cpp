#include "wakeloc/channel.hpp"

#include <cmath>

namespace wakeloc {

namespace {
constexpr double kPsPerS = static_cast<double>(kPicosPerSecond);
}

std::string_view to_string(RadioChannel ch) {
    return ch == RadioChannel::Uwb ? "uwb" : "wuc";
}

std::vector<std::string> ChannelParams::violations() const {
    std::vector<std::string> out;
    if (!(uwb_range > 0.0)) out.emplace_back("channel.uwb_range_m must be > 0");
    if (!(wuc_range > 0.0)) out.emplace_back("channel.wuc_range_m must be > 0");
    if (wuc_range > uwb_range) out.emplace_back("channel.wuc_range_m must not exceed channel.uwb_range_m");
    if (uwb_frame_airtime.count() <= 0) out.emplace_back("channel.uwb_frame_airtime_s must be > 0");
    if (wuc_airtime.count() <= 0) out.emplace_back("channel.wuc_airtime_s must be > 0");
    if (!(toa_noise_sigma >= 0.0)) out.emplace_back("channel.toa_noise_sigma_s must be >= 0");
    if (!(cfo_noise_sigma >= 0.0)) out.emplace_back("channel.cfo_noise_sigma must be >= 0");
    return out;
}

RadioChannel channel_of(const MessageKind& kind) {
    return holds<msg::WakeUpCall>(kind) ? RadioChannel::WakeUp : RadioChannel::Uwb;
}

TimeDuration airtime(const MessageKind& kind, const ChannelParams& params) {
    return channel_of(kind) == RadioChannel::WakeUp ? params.wuc_airtime : params.uwb_frame_airtime;
}

double propagation_delay_ps(const Position3& a, const Position3& b) {
    return distance(a, b) / kSpeedOfLight * kPsPerS;
}

TimeDuration propagation_delay(const Position3& a, const Position3& b, const ChannelParams&) {
    return TimeDuration(std::llround(propagation_delay_ps(a, b)));
}

bool in_range(const Transmission& tx, const Position3& receiver, const ChannelParams& params,
              const LinkBlocked& blocked) {
    if (distance(tx.origin, receiver) > params.range(tx.channel)) return false;
    return !(blocked && blocked(tx.origin, receiver));
}

ArrivalWindow arrival_window(const Transmission& tx, const Position3& receiver) {
    const double delay = propagation_delay_ps(tx.origin, receiver);
    const Timestamp start = tx.start.plus_ps(delay);
    return {start, start + tx.duration};
}

std::vector<RxEvent> arbitrate_receptions(const Receiver& receiver, std::span<const Transmission> concurrent,
                                          const ChannelParams& params, std::mt19937_64& rng,
                                          const LinkBlocked& blocked) {
    struct Candidate {
        const Transmission* tx;
        ArrivalWindow window;
    };
    std::vector<Candidate> heard;
    heard.reserve(concurrent.size());
    for (const Transmission& tx : concurrent) {
        if (tx.sender == receiver.id) continue;
        if (!in_range(tx, receiver.position, params, blocked)) continue;
        heard.push_back({&tx, arrival_window(tx, receiver.position)});
    }

    std::vector<RxEvent> out;
    for (std::size_t i = 0; i < heard.size(); ++i) {
        bool collided = false;
        for (std::size_t j = 0; j < heard.size() && !collided; ++j) {
            if (i == j || heard[i].tx->channel != heard[j].tx->channel) continue;
            const Timestamp lo = std::max(heard[i].window.start, heard[j].window.start,
                                          [](const Timestamp& a, const Timestamp& b) { return a < b; });
            const Timestamp hi = std::min(heard[i].window.end, heard[j].window.end,
                                          [](const Timestamp& a, const Timestamp& b) { return a < b; });
            collided = lo < hi;
        }
        if (collided) continue;

        const Transmission& tx = *heard[i].tx;
        RxEvent ev;
        ev.receiver = receiver.id;
        ev.tx = tx.id;
        ev.sender = tx.sender;
        ev.source = tx.source;
        ev.kind = tx.kind;
        ev.channel = tx.channel;
        ev.round = tx.round;
        ev.arrival_global = heard[i].window.start;
        Timestamp local = to_local(ev.arrival_global, receiver.clock);
        if (params.toa_noise_sigma > 0.0 && tx.channel == RadioChannel::Uwb) {
            std::normal_distribution<double> noise(0.0, params.toa_noise_sigma * kPsPerS);
            local = local.plus_ps(noise(rng));
        }
        ev.local_timestamp = local;
        const double t_s = ev.arrival_global.to_seconds();
        ev.cfo = cfo_ratio(tx.sender_clock, receiver.clock, params.cfo_noise_sigma, rng, t_s);
        out.push_back(std::move(ev));
    }
    return out;
}

}  // namespace wakeloc
