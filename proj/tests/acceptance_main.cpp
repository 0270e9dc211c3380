#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "wakeloc/acceptance.hpp"
#include "wakeloc/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"WakeLoc acceptance criteria"};
    wakeloc::AcceptanceOptions options;
    options.workers = wakeloc::default_workers();
    app.add_option("--criteria", options.groups, "groups to run (default: all)")->delimiter(',');
    app.add_option("--workers", options.workers, "worker threads")->check(CLI::Range(1, 64));
    app.add_option("--seed", options.seed, "base seed");
    CLI11_PARSE(app, argc, argv);

    int failed = 0;
    options.on_result = [&](const wakeloc::CriterionResult& r) {
        std::printf("%s\n", wakeloc::format_result(r).c_str());
        std::fflush(stdout);
        if (!r.pass) ++failed;
    };
    try {
        const auto results = wakeloc::run_acceptance(options);
        std::printf("%zu criteria, %d failed\n", results.size(), failed);
        return failed == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
