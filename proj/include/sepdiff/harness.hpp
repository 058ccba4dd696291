#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sepdiff/config.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/guidance.hpp"
#include "sepdiff/metrics.hpp"
#include "sepdiff/prior.hpp"
#include "sepdiff/schedule.hpp"
#include "sepdiff/signals.hpp"
#include "sepdiff/solvers.hpp"
#include "sepdiff/wav.hpp"

namespace sepdiff {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string format_db(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string perm_string(const std::vector<std::size_t>& perm) {
    std::string s;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(perm[i] + 1);
    }
    return s;
}

inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("SEPDIFF_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

struct VariantRun {
    std::string name;
    SeparationConfig sep;
    bool unprocessed = false;
};

inline VariantRun resolve_variant(const std::string& name, const SeparationConfig& base) {
    VariantRun v;
    v.name = name;
    v.sep = base;
    if (name == "unprocessed") {
        v.unprocessed = true;
    } else if (name == "dps") {
        v.sep.solver = SolverKind::dps;
    } else if (name == "dsg") {
        v.sep.solver = SolverKind::dsg;
    } else if (name == "dirac") {
        v.sep.solver = SolverKind::dirac;
        v.sep.T_D = 0;
        v.sep.guidance_enabled = false;
    } else if (name == "hybrid") {
        v.sep.solver = SolverKind::hybrid;
        v.sep.guidance_enabled = false;
    } else if (name == "hybrid_guided") {
        v.sep.solver = SolverKind::hybrid;
        v.sep.guidance_enabled = true;
    } else {
        throw ConfigError("unknown benchmark variant '" + name + "'");
    }
    return v;
}

}  // namespace detail

struct SeparateOutcome {
    std::vector<std::string> wav_paths;
    double residual_l2 = 0.0;
    double residual_inf = 0.0;
    ordered_json report;
};

// `separate` command: synthesize or load a mixture, run the configured
// solver, write one WAV per estimated source plus a JSON run record.
inline SeparateOutcome run_separate(const RunConfig& rc, const std::string& input_wav,
                                    const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    Waveform y;
    if (!input_wav.empty()) {
        y = read_wav(input_wav);
    } else {
        y = make_mixture(rc.mix, rc.sources).y;
    }
    const std::size_t D = y.samples.size();
    if (D == 0) throw ParamError("mixture is empty");

    auto sched = std::make_shared<const NoiseSchedule>(
        linear_beta_schedule(rc.T, rc.beta_min, rc.beta_max));
    std::vector<std::unique_ptr<ScoreModel>> owned;
    std::vector<const ScoreModel*> models;
    for (const auto& p : rc.priors) {
        owned.push_back(make_score_model(p, D, sched));
        models.push_back(owned.back().get());
    }
    std::unique_ptr<Embedder> embedder;
    if (rc.sep.guidance_enabled) {
        embedder = make_embedder(rc);
    }

    const auto start = std::chrono::steady_clock::now();
    const auto estimates =
        separate(y.samples, rc.sep, models, *sched, embedder.get());
    const auto elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();

    SeparateOutcome out;
    double l2 = 0.0, linf = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
        double s = 0.0;
        for (const auto& est : estimates) s += est[i];
        const double d = y.samples[i] - s;
        l2 += d * d;
        linf = std::max(linf, std::abs(d));
    }
    out.residual_l2 = std::sqrt(l2);
    out.residual_inf = linf;

    for (std::size_t k = 0; k < estimates.size(); ++k) {
        Waveform w;
        w.sample_rate = y.sample_rate;
        w.samples = estimates[k];
        const std::string path =
            (fs::path(out_dir) / ("est_" + std::to_string(k + 1) + ".wav")).string();
        write_wav(path, w, rc.out_format);
        out.wav_paths.push_back(path);
    }

    ordered_json j;
    j["config_hash"] = rc.config_hash;
    j["seed"] = rc.sep.seed;
    j["sources"] = estimates.size();
    j["samples"] = D;
    j["sample_rate"] = y.sample_rate;
    j["residual_l2"] = out.residual_l2;
    j["residual_inf"] = out.residual_inf;
    j["wall_time_ms"] = elapsed;
    out.report = j;
    std::ofstream jf(fs::path(out_dir) / "run.json");
    if (!jf) throw IoError("cannot write run.json under " + out_dir);
    jf << j.dump(2) << "\n";
    return out;
}

struct BenchmarkOutcome {
    EvalReport report;
    std::string csv_path;
    std::string json_path;
};

// `benchmark` command: N synthetic mixtures through every configured solver
// variant, PIT-scored; per-row CSV plus an aggregate JSON summary. Mixtures
// run on a worker pool; rows are emitted in deterministic order regardless.
inline BenchmarkOutcome run_benchmark(const RunConfig& rc, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<detail::VariantRun> variants;
    for (const auto& name : rc.variants) {
        variants.push_back(detail::resolve_variant(name, rc.sep));
    }

    auto sched = std::make_shared<const NoiseSchedule>(
        linear_beta_schedule(rc.T, rc.beta_min, rc.beta_max));
    const RandomStream mix_seeds(rc.sep.seed, "benchmark/mixtures");

    const std::size_t N = rc.n_mixtures;
    // results[v][i] = row for variant v on mixture i
    std::vector<std::vector<MixtureEval>> results(variants.size(),
                                                  std::vector<MixtureEval>(N));

    auto eval_mixture = [&](std::size_t i) {
        MixtureSpec ms = rc.mix;
        ms.seed = mix_seeds.value(i);
        const Mixture mix = make_mixture(ms, rc.sources);
        const std::size_t D = mix.y.samples.size();

        std::vector<std::unique_ptr<ScoreModel>> owned;
        std::vector<const ScoreModel*> models;
        for (const auto& p : rc.priors) {
            owned.push_back(make_score_model(p, D, sched));
            models.push_back(owned.back().get());
        }
        std::unique_ptr<Embedder> embedder;
        const bool any_guided = std::any_of(variants.begin(), variants.end(), [](const auto& v) {
            return v.sep.guidance_enabled;
        });
        if (any_guided) {
            embedder = make_embedder(rc);
        }
        std::vector<std::vector<double>> refs;
        for (const auto& s : mix.sources) refs.push_back(s.samples);

        for (std::size_t v = 0; v < variants.size(); ++v) {
            MixtureEval row;
            row.mixture_id = i;
            row.solver = variants[v].name;
            try {
                std::vector<std::vector<double>> ests;
                if (variants[v].unprocessed) {
                    ests.assign(static_cast<std::size_t>(rc.sep.K),
                                std::vector<double>(D));
                    for (auto& e : ests) {
                        for (std::size_t s = 0; s < D; ++s) {
                            e[s] = mix.y.samples[s] / static_cast<double>(rc.sep.K);
                        }
                    }
                } else {
                    SeparationConfig sep = variants[v].sep;
                    // one root seed, derived per (variant name, mixture index):
                    // adding a variant never perturbs another variant's draws
                    sep.seed = RandomStream(rc.sep.seed, "benchmark/run/" + variants[v].name)
                                   .value(i);
                    ests = separate(mix.y.samples, sep, models, *sched, embedder.get());
                }
                const auto pit = pit_assign(refs, ests, &si_sdr);
                row.perm = pit.perm;
                row.si_sdr_db = pit.scores;
                row.sdr_db.resize(refs.size());
                for (std::size_t r = 0; r < refs.size(); ++r) {
                    row.sdr_db[r] = sdr(refs[r], ests[pit.perm[r]]);
                }
                if (rc.sep.K == 2) {
                    row.swap = swap_rate(refs, ests, rc.swap_frame);
                }
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
            results[v][i] = std::move(row);
        }
    };

    const std::size_t workers = detail::worker_count(N);
    if (workers <= 1) {
        for (std::size_t i = 0; i < N; ++i) eval_mixture(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= N) return;
                        i = next++;
                    }
                    eval_mixture(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    BenchmarkOutcome out;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (std::size_t i = 0; i < N; ++i) {
            out.report.rows.push_back(results[v][i]);
        }
        out.report.aggregates.push_back(
            aggregate_rows(variants[v].name, results[v]));
    }

    out.csv_path = (fs::path(out_dir) / "benchmark.csv").string();
    std::ofstream csv(out.csv_path);
    if (!csv) throw IoError("cannot write " + out.csv_path);
    csv << "mixture_id,solver,source_idx,si_sdr_db,sdr_db,swap_rate,perm\n";
    for (const auto& row : out.report.rows) {
        if (row.failed) continue;
        for (std::size_t s = 0; s < row.si_sdr_db.size(); ++s) {
            csv << row.mixture_id << ',' << row.solver << ',' << (s + 1) << ','
                << detail::format_db(row.si_sdr_db[s]) << ','
                << detail::format_db(row.sdr_db[s]) << ','
                << (row.swap >= 0.0 ? detail::format_db(row.swap) : "nan") << ','
                << detail::perm_string(row.perm) << "\n";
        }
    }
    csv.close();

    ordered_json j;
    j["config_hash"] = rc.config_hash;
    j["mixtures"] = N;
    j["sources"] = rc.sep.K;
    ordered_json aggs = ordered_json::array();
    for (const auto& a : out.report.aggregates) {
        ordered_json ja;
        ja["solver"] = a.solver;
        ja["n"] = a.n;
        ja["failures"] = a.failures;
        ja["mean_si_sdr_db"] = a.mean_si_sdr;
        ja["se_si_sdr_db"] = a.se_si_sdr;
        ja["mean_sdr_db"] = a.mean_sdr;
        ja["se_sdr_db"] = a.se_sdr;
        ja["mean_swap_rate"] = a.mean_swap;
        ja["se_swap_rate"] = a.se_swap;
        aggs.push_back(ja);
    }
    j["aggregates"] = aggs;
    out.json_path = (fs::path(out_dir) / "summary.json").string();
    std::ofstream jf(out.json_path);
    if (!jf) throw IoError("cannot write " + out.json_path);
    jf << j.dump(2) << "\n";
    return out;
}

}  // namespace sepdiff
