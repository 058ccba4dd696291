#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "sepdiff/config.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/harness.hpp"
#include "sepdiff/selfcheck.hpp"

namespace sepdiff::cli {

// Exit codes: 0 success, 1 generic failure, then one distinct code per
// error family so scripts can branch on the reason.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;

namespace detail {

inline int do_separate(const std::string& config, const std::string& input,
                       const std::string& out) {
    const auto rc = load_run_config(config);
    try {
        const auto result = run_separate(rc, input, out);
        std::printf("wrote %zu source estimates to %s (residual_inf %.3e)\n",
                    result.wav_paths.size(), out.c_str(), result.residual_inf);
        return kExitOk;
    } catch (const DivergenceError& e) {
        // leave a diagnostic record behind even when the solver blows up
        namespace fs = std::filesystem;
        fs::create_directories(out);
        ordered_json j;
        j["config_hash"] = rc.config_hash;
        j["seed"] = rc.sep.seed;
        j["error"] = e.what();
        std::ofstream jf(fs::path(out) / "run.json");
        jf << j.dump(2) << "\n";
        throw;
    }
}

inline int do_benchmark(const std::string& config, const std::string& out) {
    const auto rc = load_run_config(config);
    const auto result = run_benchmark(rc, out);
    std::printf("%s\n", result.csv_path.c_str());
    std::printf("%-16s %10s %10s %10s %9s\n", "solver", "si_sdr_db", "sdr_db", "swap_rate",
                "failures");
    for (const auto& a : result.report.aggregates) {
        std::printf("%-16s %10.3f %10.3f %10.3f %9zu\n", a.solver.c_str(), a.mean_si_sdr,
                    a.mean_sdr, a.mean_swap, a.failures);
    }
    return kExitOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"diffusion-based source separation harness"};
    app.require_subcommand(1);

    std::string config, input, out = "out";

    auto* sep = app.add_subcommand("separate", "separate one mixture into source estimates");
    sep->add_option("--config", config, "config file")->required();
    sep->add_option("--input", input, "mixture WAV (synthesized when omitted)");
    sep->add_option("--out", out, "output directory");

    auto* bench = app.add_subcommand("benchmark", "run N mixtures through solver variants");
    bench->add_option("--config", config, "config file")->required();
    bench->add_option("--out", out, "output directory");

    auto* self = app.add_subcommand("selfcheck", "run the oracle self-check suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(sep)) return detail::do_separate(config, input, out);
        if (app.got_subcommand(bench)) return detail::do_benchmark(config, out);
        if (app.got_subcommand(self)) return run_selfcheck() ? kExitOk : kExitFailure;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace sepdiff::cli
