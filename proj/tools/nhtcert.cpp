#include "nht/nhtcert.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Numerical certificates for normally hyperbolic trapping and threshold conditions"};
    std::string config, task, out;
    std::uint64_t seed = 0;
    bool quiet = false;
    app.add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--task", task, "override the configured task")
        ->check(CLI::IsMember({"parse-check", "flow", "find-invariant", "certify", "thresholds", "compare-paper"}));
    app.add_option("--out", out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
    app.add_flag("--quiet", quiet, "print nothing but errors");
    app.set_version_flag("--version", nht_version());
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    std::unique_ptr<nht_session, decltype(&nht_session_destroy)> s(nht_session_create(), nht_session_destroy);
    if (!s) {
        std::fprintf(stderr, "error: out of memory\n");
        return 1;
    }
    nht_session_set_quiet(s.get(), quiet);
    if (!task.empty()) nht_session_set_task(s.get(), task.c_str());
    if (!out.empty()) nht_session_set_out_dir(s.get(), out.c_str());
    if (*seed_opt) nht_session_set_seed(s.get(), seed);

    const int rc = nht_run_config_file(s.get(), config.c_str());
    if (rc == NHT_ERROR) {
        std::fprintf(stderr, "error: %s\n", nht_last_error(s.get()));
        return 1;
    }
    if (!quiet) {
        for (size_t i = 0; i < nht_log_count(s.get()); ++i) std::printf("%s\n", nht_log_line(s.get(), i));
        for (size_t i = 0; i < nht_written_count(s.get()); ++i) std::printf("wrote %s\n", nht_written_path(s.get(), i));
        std::printf("verdict: %s\n", nht_last_verdict(s.get()));
    }
    return rc;
}
