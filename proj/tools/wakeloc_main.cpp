#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wakeloc/acceptance.hpp"
#include "wakeloc/experiment.hpp"

namespace fs = std::filesystem;
using namespace wakeloc;

namespace {

enum Exit { kOk = 0, kCriteriaFailed = 1, kInvalid = 2, kRuntime = 3 };

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int workers = default_workers();
    bool force = false;
};

// Thrown for usage problems that map to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig load(const Common& c) {
    if (!fs::exists(c.config)) throw Error(Errc::Io, "config file '" + c.config + "' does not exist");
    ScenarioConfig config = load_config(read_file(c.config));
    if (c.seed) config.seed = *c.seed;
    return config;
}

// Collects files and writes them only after the overwrite check passes.
class OutputDir {
public:
    OutputDir(std::string dir, bool force) : dir_(std::move(dir)), force_(force) {}

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    void commit() const {
        if (dir_.empty()) throw UsageError("--out is required");
        if (!force_) {
            for (const auto& [name, _] : files_) {
                const fs::path p = fs::path(dir_) / name;
                if (fs::exists(p)) throw UsageError("'" + p.string() + "' exists; pass --force to overwrite");
            }
        }
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(Errc::Io, "cannot create '" + dir_ + "': " + ec.message());
        for (const auto& [name, content] : files_) {
            const fs::path p = fs::path(dir_) / name;
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            out << content;
            if (!out) throw Error(Errc::Io, "cannot write '" + p.string() + "'");
        }
    }

private:
    std::string dir_;
    bool force_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string suffixed(const std::string& stem, const std::string& ext, std::size_t p, std::size_t n) {
    return n == 1 ? stem + ext : stem + "_" + std::to_string(p) + ext;
}

std::string summary_json(const ScenarioResult& r) {
    nlohmann::ordered_json j;
    j["scheme"] = std::string(to_string(r.config.scheme));
    j["seed"] = r.config.seed;
    j["anchors"] = r.layout.anchors.size();
    j["tags"] = r.config.tags.count;
    auto& placements = j["placements"];
    placements = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < r.traces.size(); ++p) {
        const auto& t = r.traces[p];
        std::map<std::string, int> failures;
        int ok = 0;
        for (const auto& o : t.outcomes) {
            if (o.success()) {
                ++ok;
            } else {
                ++failures[std::string(to_string(*o.failure))];
            }
        }
        nlohmann::ordered_json e;
        e["placement"] = p;
        e["horizon_s"] = t.horizon.to_seconds();
        e["events"] = t.events;
        e["transmissions"] = t.transmissions.size();
        e["outcomes"] = t.outcomes.size();
        e["successes"] = ok;
        e["failures"] = failures;
        placements.push_back(e);
    }
    return j.dump(2) + "\n";
}

int cmd_run(const Common& c) {
    const ScenarioConfig config = load(c);
    const ScenarioResult r = run_scenario(config, c.workers);
    const auto outcomes = r.outcomes();
    const auto samples = r.power_samples();
    OutputDir out(c.out, c.force);
    out.add("power.csv", power_csv(samples));
    out.add("power_curve.csv", power_curve_csv(power_curve(samples)));
    out.add("accuracy.csv", accuracy_csv(accuracy_rows(config.scheme, outcomes)));
    out.add("latency.csv", latency_csv(latency_rows(config.scheme, outcomes)));
    out.add("layout.csv", layout_csv(r.deployments.front()));
    out.add("summary.json", summary_json(r));
    const std::size_t n = r.traces.size();
    for (std::size_t p = 0; p < n; ++p) {
        if (config.output.measurements) {
            out.add(suffixed("measurements", ".csv", p, n), measurements_csv(measurement_rows(r.traces[p].outcomes)));
        }
        if (config.output.trace) out.add(suffixed("trace", ".ndjson", p, n), trace_ndjson(r.traces[p]));
    }
    out.commit();
    return kOk;
}

int cmd_sweep(const Common& c, std::vector<double> periods, std::vector<int> tag_counts) {
    const ScenarioConfig config = load(c);
    if (periods.empty()) periods = config.sweep.periods_s;
    if (tag_counts.empty()) tag_counts = config.sweep.tag_counts;
    const auto samples = run_sweep(config, periods, tag_counts, c.workers);
    OutputDir out(c.out, c.force);
    out.add("power.csv", power_csv(samples));
    out.add("power_curve.csv", power_curve_csv(power_curve(samples)));
    out.commit();
    return kOk;
}

int cmd_solve(const Common& c, const std::string& measurements) {
    ScenarioConfig config;
    if (!c.config.empty()) config = load(c);
    if (c.seed) config.seed = *c.seed;
    if (!fs::exists(measurements)) throw Error(Errc::Io, "measurements file '" + measurements + "' does not exist");
    const auto rows = parse_measurements_csv(read_file(measurements));
    const TwrOptions twr{config.protocol.cfo_correction, config.channel.uwb_range};
    const std::string csv = estimates_csv(solve_measurements(rows, config.solver, twr, config.seed));
    if (c.out.empty()) {
        std::cout << csv;
    } else {
        OutputDir out(c.out, c.force);
        out.add("estimates.csv", csv);
        out.commit();
    }
    return kOk;
}

int cmd_validate(const Common& c) {
    const ScenarioConfig config = load(c);
    generate_layout(config.layout, config.seed, config.channel.uwb_range);
    std::cout << c.config << ": ok\n";
    return kOk;
}

int cmd_suite(const Common& c, const std::vector<std::string>& groups) {
    AcceptanceOptions options;
    if (!c.config.empty()) {
        const ScenarioConfig config = load(c);
        options.energy = config.energy;
        options.battery_capacity_wh = config.battery_capacity_wh;
    }
    options.workers = c.workers;
    options.groups = groups;
    if (c.seed) options.seed = *c.seed;
    int failed = 0;
    options.on_result = [&](const CriterionResult& r) {
        std::cout << format_result(r) << std::endl;
        if (!r.pass) ++failed;
    };
    const auto results = run_acceptance(options);
    std::cout << results.size() << " criteria, " << failed << " failed\n";
    return failed == 0 ? kOk : kCriteriaFailed;
}

void print_error(const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-event simulator and solvers for wake-up-call UWB localization"};
    app.require_subcommand(1);
    app.footer("Environment: WAKELOC_WORKERS sets the default worker count.\n"
               "Exit codes: 0 ok, 1 acceptance criteria failed, 2 invalid input, 3 runtime error.");

    Common common;
    std::vector<double> periods;
    std::vector<int> tag_counts;
    std::vector<std::string> groups;
    std::string measurements;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", common.config, "scenario configuration (JSON)");
        if (config_required) opt->required();
        sub->add_option("--seed", common.seed, "override the configuration seed");
        sub->add_option("--workers", common.workers, "parallel replications (default: WAKELOC_WORKERS or 1)")
            ->check(CLI::Range(1, 256));
    };
    auto add_out = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--out", common.out, "output directory, created if absent");
        if (required) opt->required();
        sub->add_flag("--force", common.force, "overwrite existing output files");
    };

    auto* run = app.add_subcommand("run", "simulate one scenario and write CSV reports");
    add_common(run, true);
    add_out(run, true);

    auto* sweep = app.add_subcommand("sweep", "power sweep over localization periods and tag counts");
    add_common(sweep, true);
    add_out(sweep, true);
    sweep->add_option("--periods", periods, "periods in seconds (default: config sweep.periods_s)")->delimiter(',');
    sweep->add_option("--tag-counts", tag_counts, "tag counts (default: config sweep.tag_counts)")->delimiter(',');

    auto* solve = app.add_subcommand("solve", "solve positions from a measurements CSV");
    add_common(solve, false);
    add_out(solve, false);
    solve->add_option("--measurements", measurements, "measurements CSV")->required();

    auto* validate_cmd = app.add_subcommand("validate", "check a configuration file");
    add_common(validate_cmd, true);

    auto* suite = app.add_subcommand("paper-suite", "run the acceptance criteria and print a pass/fail table");
    add_common(suite, false);
    suite->add_option("--criteria", groups, "groups: power,latency,energy,solver,collision,determinism,budget")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*run) return cmd_run(common);
        if (*sweep) return cmd_sweep(common, periods, tag_counts);
        if (*solve) return cmd_solve(common, measurements);
        if (*validate_cmd) return cmd_validate(common);
        if (*suite) return cmd_suite(common, groups);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const Error& e) {
        print_error(e);
        switch (e.code()) {
        case Errc::Io:
        case Errc::ParseError:
        case Errc::ValidationError:
        case Errc::InfeasibleSpec:
            return kInvalid;
        default:
            return kRuntime;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kInvalid;
}
