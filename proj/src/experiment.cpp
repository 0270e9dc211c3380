#include "wakeloc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace wakeloc {

std::vector<LocalizationOutcome> ScenarioResult::outcomes() const {
    std::vector<LocalizationOutcome> out;
    for (const auto& t : traces) out.insert(out.end(), t.outcomes.begin(), t.outcomes.end());
    return out;
}

double ScenarioResult::period_s() const {
    return config.localization.period_s;
}

std::vector<PowerSample> ScenarioResult::power_samples() const {
    std::vector<PowerSample> out;
    for (std::size_t p = 0; p < traces.size(); ++p) {
        out.push_back(power_sample(traces[p], deployments[p].n_anchors, period_s(), static_cast<int>(p)));
    }
    return out;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    const std::size_t n_threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

ScenarioResult run_scenario(const ScenarioConfig& config, int workers) {
    validate(config);
    ScenarioResult r;
    r.config = config;
    r.layout = generate_layout(config.layout, config.seed, config.channel.uwb_range);
    std::vector<std::vector<Position3>> placements;
    if (config.tags.positions) {
        placements.push_back(*config.tags.positions);
    } else {
        placements = sample_placements(r.layout, config.tags.count, config.tags.placements, config.seed,
                                       config.tags.height_m);
    }
    r.deployments.resize(placements.size());
    r.traces.resize(placements.size());
    parallel_for(placements.size(), workers, [&](std::size_t p) {
        r.deployments[p] = make_deployment(config, r.layout, placements[p], p);
        r.traces[p] = run(config, r.deployments[p]);
    });
    return r;
}

ScenarioConfig sweep_point(const ScenarioConfig& base, double period_s, int n_tags) {
    ScenarioConfig c = base;
    c.localization.period_s = period_s;
    if (c.scheme == Scheme::FlexTdoa) c.protocol.flex_period_s = period_s;
    c.tags.count = n_tags;
    c.tags.positions.reset();
    c.horizon_s.reset();
    c.localization.start_s = 0.0;
    if (!c.localization.rounds_per_tag) c.localization.rounds_per_tag = 20;
    return c;
}

std::vector<PowerSample> run_sweep(const ScenarioConfig& base, const std::vector<double>& periods,
                                   const std::vector<int>& tag_counts, int workers) {
    if (periods.empty() || tag_counts.empty()) {
        throw Error(Errc::ValidationError, "sweep needs at least one period and one tag count",
                    {"sweep.periods_s and sweep.tag_counts must not be empty"});
    }
    struct Job {
        ScenarioConfig config;
        std::size_t placement;
    };
    std::vector<Job> jobs;
    for (double p : periods) {
        for (int n : tag_counts) {
            ScenarioConfig c = sweep_point(base, p, n);
            validate(c);
            for (int k = 0; k < c.tags.placements; ++k) jobs.push_back({c, static_cast<std::size_t>(k)});
        }
    }
    const Layout layout = generate_layout(base.layout, base.seed, base.channel.uwb_range);
    std::vector<PowerSample> out(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto tags = sample_placements(layout, job.config.tags.count, static_cast<int>(job.placement) + 1,
                                            job.config.seed, job.config.tags.height_m)[job.placement];
        const Deployment d = make_deployment(job.config, layout, tags, job.placement);
        const SimulationTrace t = run(job.config, d);
        out[i] = power_sample(t, d.n_anchors, job.config.localization.period_s, static_cast<int>(job.placement));
    });
    return out;
}

int default_workers() {
    if (const char* env = std::getenv("WAKELOC_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

}  // namespace wakeloc
