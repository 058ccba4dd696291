// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sepdiff/sepdiff.hpp"

using namespace sepdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string note;

    void require(bool ok, const std::string& why) {
        if (!ok) {
            pass = false;
            if (!note.empty()) note += "; ";
            note += why;
        }
    }
};

std::vector<double> random_vec(RandomStream& rs, int tag, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = scale * rs.normal(step_counter(tag, 0, i));
    return v;
}

bool bit_identical(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].size() != b[k].size() ||
            std::memcmp(a[k].data(), b[k].data(), a[k].size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criterion 1: closed-form Gaussian posterior, Monte Carlo -------------

Outcome criterion_gaussian_posterior() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    GaussianScoreModel m1(GaussianPrior({1.0}, {0.5}), sp);
    GaussianScoreModel m2(GaussianPrior({-1.0}, {0.5}), sp);
    std::vector<const ScoreModel*> models{&m1, &m2};
    const std::vector<double> y{0.0};
    // closed form given y = 0: means +1 / -1, per-track variance 0.25
    const double cf_mean[2] = {1.0, -1.0};
    const double cf_var = 0.25;

    SeparationConfig cfg;
    cfg.K = 2;
    cfg.T_D = 1;
    cfg.T_spk_start = 0;
    cfg.T_spk_end = 0;
    const int N = 1000;
    double sum[2] = {0, 0}, sum2[2] = {0, 0};
    for (int i = 0; i < N; ++i) {
        cfg.seed = 1 + static_cast<std::uint64_t>(i);
        const auto est = hybrid_separate(y, cfg, models, sched);
        for (int k = 0; k < 2; ++k) {
            sum[k] += est[k][0];
            sum2[k] += est[k][0] * est[k][0];
        }
    }
    for (int k = 0; k < 2; ++k) {
        const double mean = sum[k] / N;
        const double var = sum2[k] / N - mean * mean;
        const double se = std::sqrt(var / N);
        char buf[160];
        if (std::abs(mean - cf_mean[k]) > 3.0 * se) {
            std::snprintf(buf, sizeof(buf), "track %d mean %.4f vs %.1f (3se %.4f)", k + 1,
                          mean, cf_mean[k], 3.0 * se);
            out.require(false, buf);
        }
        if (var < 0.8 * cf_var || var > 1.2 * cf_var) {
            std::snprintf(buf, sizeof(buf), "track %d variance %.4f vs %.2f +-20%%", k + 1, var,
                          cf_var);
            out.require(false, buf);
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(secs < 60.0, "runtime " + std::to_string(secs) + " s exceeds 60 s");
    return out;
}

// --- criterion 2: per-step mixture consistency -----------------------------

Outcome criterion_mixture_consistency() {
    Outcome out;
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    const std::size_t D = 1024;
    std::vector<std::unique_ptr<ScoreModel>> owned;
    std::vector<const ScoreModel*> models;
    for (int k = 0; k < 3; ++k) {
        owned.push_back(std::make_unique<GaussianScoreModel>(
            GaussianPrior::isotropic(D, 0.2 * k, 0.8), sp));
        models.push_back(owned.back().get());
    }
    RandomStream rs(2024, "acceptance/c2");
    const auto y = random_vec(rs, 0, D);
    double ymax = 1.0;
    for (double v : y) ymax = std::max(ymax, std::abs(v));

    SeparationConfig cfg;
    cfg.K = 3;
    cfg.T_D = 1;
    cfg.T_spk_start = 0;
    cfg.T_spk_end = 0;
    cfg.seed = 7;
    int steps = 0;
    double worst = 0.0;
    hybrid_separate(y, cfg, models, sched, nullptr, [&](const SolverStep& s) {
        if (s.phase == SolverStep::Phase::dirac) {
            ++steps;
            worst = std::max(worst, s.residual_inf);
        }
    });
    out.require(steps == 200, "expected 200 logged steps");
    char buf[120];
    std::snprintf(buf, sizeof(buf), "worst post-projection residual %.3e > 1e-9 * %.3f", worst,
                  ymax);
    out.require(worst <= 1e-9 * ymax, buf);
    return out;
}

// --- criterion 3: Tweedie exactness on the default schedule ------------------

Outcome criterion_tweedie() {
    Outcome out;
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    RandomStream rs(3, "acceptance/c3");
    const std::size_t D = 64;
    const auto mean = random_vec(rs, 0, D);
    auto var = random_vec(rs, 1, D);
    for (double& v : var) v = 0.3 + std::abs(v);
    GaussianPrior prior(mean, var);
    double worst = 0.0;
    for (int t : {1, 50, 100, 150, 200}) {
        const auto x = random_vec(rs, 10 + t, D, 2.0);
        const auto sc = gaussian_score(prior, sched, x, t);
        const auto x0 = tweedie_denoise(sched, x, sc, t);
        const double ab = sched.alpha_bar[t];
        for (std::size_t i = 0; i < D; ++i) {
            const double denom = ab * var[i] + (1.0 - ab);
            const double analytic =
                (std::sqrt(ab) * var[i] * x[i] + (1.0 - ab) * mean[i]) / denom;
            worst = std::max(worst,
                             std::abs(x0[i] - analytic) / std::max(1.0, std::abs(analytic)));
        }
    }
    out.require(worst <= 1e-9,
                "worst relative deviation " + std::to_string(worst) + " > 1e-9");
    return out;
}

// --- criterion 4: gradient oracles vs finite differences -------------------

Outcome criterion_gradient_oracles() {
    Outcome out;
    const std::size_t D = 512;
    // 4a: speaker guidance gradient, 20 instances, rel <= 1e-4
    {
        BandEnergyEmbedder emb(128, 64, 12);
        RandomStream rs(4, "acceptance/c4a");
        double worst = 0.0;
        for (int inst = 0; inst < 20; ++inst) {
            std::vector<std::vector<double>> tracks(2, std::vector<double>(D));
            for (int k = 0; k < 2; ++k) {
                for (std::size_t i = 0; i < D; ++i) {
                    tracks[k][i] = rs.normal(step_counter(inst, k, i));
                }
            }
            const auto g = speaker_guidance_gradient(tracks, emb);
            if (g.raw_norm == 0.0) {
                out.require(false, "guidance gradient unexpectedly null");
                continue;
            }
            auto loss_of = [&](const std::vector<std::vector<double>>& xs) {
                std::vector<EmbeddingMatrix> es;
                for (const auto& x : xs) es.push_back(emb.embed(x));
                return speaker_loss(es);
            };
            const double h = 1e-6;
            double err2 = 0.0, fd2 = 0.0;
            for (int k = 0; k < 2; ++k) {
                for (std::size_t i = 0; i < D; ++i) {
                    auto tp = tracks, tm = tracks;
                    tp[k][i] += h;
                    tm[k][i] -= h;
                    const double fd = (loss_of(tp) - loss_of(tm)) / (2.0 * h);
                    const double an = g.per_track[k][i] * g.raw_norm;
                    err2 += (an - fd) * (an - fd);
                    fd2 += fd * fd;
                }
            }
            worst = std::max(worst, std::sqrt(err2 / fd2));
        }
        out.require(worst <= 1e-4,
                    "guidance gradient worst rel err " + std::to_string(worst) + " > 1e-4");
    }
    // 4b: exact DPS likelihood gradient, 20 instances, rel <= 1e-5
    {
        const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
        auto sp = std::make_shared<const NoiseSchedule>(sched);
        RandomStream rs(5, "acceptance/c4b");
        double worst = 0.0;
        for (int inst = 0; inst < 20; ++inst) {
            std::vector<std::unique_ptr<GaussianScoreModel>> owned;
            std::vector<const ScoreModel*> models;
            TrackSet ts;
            ts.t = 1 + static_cast<int>(rs.value(step_counter(inst, 7, 0)) % 200);
            ts.tracks.assign(2, std::vector<double>(D));
            for (int k = 0; k < 2; ++k) {
                std::vector<double> mean(D), var(D);
                for (std::size_t i = 0; i < D; ++i) {
                    mean[i] = rs.normal(step_counter(inst, k, i));
                    var[i] = 0.4 + rs.uniform(step_counter(inst, 4 + k, i));
                    ts.tracks[k][i] = rs.normal(step_counter(inst, 2 + k, i));
                }
                owned.push_back(std::make_unique<GaussianScoreModel>(
                    GaussianPrior(std::move(mean), std::move(var)), sp));
                models.push_back(owned.back().get());
            }
            const auto y = random_vec(rs, 600 + inst, D);
            const auto grads =
                dps_likelihood_gradient(y, ts, models, sched, DpsGradientMode::exact);
            auto objective = [&](const TrackSet& probe) {
                std::vector<double> r(y);
                for (int k = 0; k < 2; ++k) {
                    const auto sc = models[k]->score(probe.tracks[k], probe.t);
                    const auto x0 = tweedie_denoise(sched, probe.tracks[k], sc, probe.t);
                    for (std::size_t i = 0; i < D; ++i) r[i] -= x0[i];
                }
                double acc = 0.0;
                for (double v : r) acc += v * v;
                return acc;
            };
            const double h = 1e-5;
            double err2 = 0.0, fd2 = 0.0;
            for (int k = 0; k < 2; ++k) {
                for (std::size_t i = 0; i < D; i += 3) {  // every third coordinate
                    auto tp = ts, tm = ts;
                    tp.tracks[k][i] += h;
                    tm.tracks[k][i] -= h;
                    const double fd = (objective(tp) - objective(tm)) / (2.0 * h);
                    err2 += (grads[k][i] - fd) * (grads[k][i] - fd);
                    fd2 += fd * fd;
                }
            }
            worst = std::max(worst, std::sqrt(err2 / fd2));
        }
        out.require(worst <= 1e-5,
                    "dps gradient worst rel err " + std::to_string(worst) + " > 1e-5");
    }
    return out;
}

// --- criterion 5: guidance descent ------------------------------------------

Outcome criterion_guidance_descent() {
    Outcome out;
    BandEnergyEmbedder emb(128, 64, 12);
    RandomStream rs(6, "acceptance/c5");
    const std::size_t D = 512;
    int wins = 0, valid = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> tracks(2, std::vector<double>(D));
        for (int k = 0; k < 2; ++k) {
            for (std::size_t i = 0; i < D; ++i) {
                tracks[k][i] = rs.normal(step_counter(trial, k, i));
            }
        }
        const auto g = speaker_guidance_gradient(tracks, emb);
        if (g.raw_norm == 0.0) continue;
        ++valid;
        auto loss_of = [&](const std::vector<std::vector<double>>& xs) {
            std::vector<EmbeddingMatrix> es;
            for (const auto& x : xs) es.push_back(emb.embed(x));
            return speaker_loss(es);
        };
        const double before = loss_of(tracks);
        // single Euler step along the guided score at step size 1e-3
        const auto guided = apply_guidance(
            std::vector<std::vector<double>>(2, std::vector<double>(D, 0.0)), g.per_track, 1.0);
        auto stepped = tracks;
        for (int k = 0; k < 2; ++k) {
            for (std::size_t i = 0; i < D; ++i) stepped[k][i] += 1e-3 * guided[k][i];
        }
        if (loss_of(stepped) < before) ++wins;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "loss decreased in %d of %d trials (< 95%%)", wins, valid);
    out.require(valid == 200, "some trials had null gradients");
    out.require(wins >= static_cast<int>(0.95 * valid), buf);
    return out;
}

// --- criterion 6: no-op equivalences ----------------------------------------

Outcome criterion_noop_equivalences() {
    Outcome out;
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    const std::size_t D = 512;
    std::vector<std::unique_ptr<ScoreModel>> owned;
    std::vector<const ScoreModel*> models;
    for (int k = 0; k < 2; ++k) {
        owned.push_back(std::make_unique<GaussianScoreModel>(
            GaussianPrior::isotropic(D, 0.0, 0.5), sp));
        models.push_back(owned.back().get());
    }
    BandEnergyEmbedder emb(128, 64, 12);
    RandomStream rs(8, "acceptance/c6");
    const auto y = random_vec(rs, 0, D, 0.3);

    SeparationConfig base;
    base.K = 2;
    base.solver = SolverKind::dirac;
    base.seed = 99;
    base.T_D = 1;
    const auto reference = separate(y, base, models, sched, &emb);

    SeparationConfig disabled = base;
    disabled.solver = SolverKind::hybrid;
    disabled.guidance_enabled = false;
    out.require(bit_identical(separate(y, disabled, models, sched, &emb), reference),
                "guidance disabled differs from plain Dirac");

    SeparationConfig empty = base;
    empty.solver = SolverKind::hybrid;
    empty.guidance_enabled = true;
    empty.T_spk_start = 0;
    empty.T_spk_end = 0;
    out.require(bit_identical(separate(y, empty, models, sched, &emb), reference),
                "empty guidance window differs from plain Dirac");

    SeparationConfig zero = base;
    zero.solver = SolverKind::hybrid;
    zero.guidance_enabled = true;
    zero.guidance_scale = 0.0;
    out.require(bit_identical(separate(y, zero, models, sched, &emb), reference),
                "r = 0 differs from plain Dirac");

    TrackSet ts;
    ts.anchor = 0;
    ts.t = 0;
    ts.tracks = {random_vec(rs, 1, D, 0.4), random_vec(rs, 2, D, 0.4)};
    TrackSet copy = ts;
    dps_refine(y, copy, models, sched, 0, GammaMode::dps_const, 0.1);
    out.require(bit_identical(copy.tracks, ts.tracks), "T_D = 0 refinement is not the identity");
    return out;
}

// --- criterion 7: metric suite ----------------------------------------------

Outcome criterion_metrics() {
    Outcome out;
    RandomStream rs(9, "acceptance/c7");
    // scale/sign invariance
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_vec(rs, trial, 128);
        const auto e = random_vec(rs, 100 + trial, 128);
        const double base = si_sdr(s, e);
        for (double alpha : {0.5, 2.0, -1.0}) {
            auto scaled = e;
            for (double& v : scaled) v *= alpha;
            worst = std::max(worst, std::abs(si_sdr(s, scaled) - base));
        }
    }
    out.require(worst <= 1e-6,
                "si_sdr scale deviation " + std::to_string(worst) + " dB > 1e-6");

    // independent exhaustive assignment on 100 random cases with K <= 4
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 1 + trial % 4;
        std::vector<std::vector<double>> refs, ests;
        for (std::size_t k = 0; k < K; ++k) {
            refs.push_back(random_vec(rs, 200 + 10 * trial + static_cast<int>(k), 24));
            ests.push_back(random_vec(rs, 700 + 10 * trial + static_cast<int>(k), 24));
        }
        const auto fast = pit_assign(refs, ests, &si_sdr);
        // second exhaustive search, recursive enumeration
        double best = -1e300;
        std::vector<std::size_t> best_perm;
        std::function<void(std::vector<std::size_t>&)> rec =
            [&](std::vector<std::size_t>& cur) {
                if (cur.size() == K) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < K; ++i) acc += si_sdr(refs[i], ests[cur[i]]);
                    if (acc > best) {
                        best = acc;
                        best_perm = cur;
                    }
                    return;
                }
                for (std::size_t j = 0; j < K; ++j) {
                    bool used = false;
                    for (std::size_t d : cur) used = used || d == j;
                    if (used) continue;
                    cur.push_back(j);
                    rec(cur);
                    cur.pop_back();
                }
            };
        std::vector<std::size_t> cur;
        rec(cur);
        if (fast.perm != best_perm) ++mismatches;
    }
    out.require(mismatches == 0,
                std::to_string(mismatches) + " of 100 assignments disagree with the oracle");

    const std::vector<double> ref{1.0, 0.0};
    const std::vector<double> est{1.0, 1.0};
    out.require(std::abs(si_sdr(ref, est)) <= 1e-12, "hand case si_sdr([1,0],[1,1]) != 0 dB");
    return out;
}

// --- criterion 8: stft round trip -------------------------------------------

Outcome criterion_stft() {
    Outcome out;
    RandomStream rs(10, "acceptance/c8");
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(16384);
    for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = rs.normal(i);
    const auto spec = stft(w, 512, 128);
    const auto back = istft(spec, 512, 128, w.sample_rate);
    double worst = 0.0;
    for (std::size_t i = 512; i + 512 < back.samples.size() && i < w.samples.size(); ++i) {
        worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
    }
    out.require(worst <= 1e-6,
                "round-trip max abs error " + std::to_string(worst) + " > 1e-6");
    return out;
}

// --- criterion 9: guidance improves temporal identity consistency -----------

Outcome criterion_behavioral(double* si_guided, double* si_unguided, double* sw_guided,
                             double* sw_unguided) {
    Outcome out;
    const int sr = 8000;
    const double dur = 0.5;
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    SpectralContrastEmbedder emb(256, 128, 16, 3);

    // two fixed harmonic "speakers" at unit RMS
    const auto protoA = scale_to_rms(harmonic_source(200.0, 4, dur, sr, 71), 0.0);
    const auto protoB = scale_to_rms(harmonic_source(310.0, 4, dur, sr, 72), 0.0);
    const std::size_t D = protoA.samples.size();
    auto scaled = [&](const Waveform& w, double g) {
        std::vector<double> v(w.samples);
        for (double& x : v) x *= g;
        return v;
    };
    // per-block bimodal source prior: every 8 ms block is speaker A or B
    BlockGmmScoreModel model({scaled(protoA, 0.7), scaled(protoB, 0.7)}, {0.5, 0.5}, 0.08, 64,
                             sp);
    std::vector<const ScoreModel*> models{&model, &model};

    RandomStream levels(314159, "acceptance/c9");
    double swap_g = 0.0, swap_u = 0.0, si_g = 0.0, si_u = 0.0;
    const int N = 50;
    for (int i = 0; i < N; ++i) {
        const double la = levels.uniform_in(2 * i, 0.6, 0.8);
        const double lb = levels.uniform_in(2 * i + 1, 0.6, 0.8);
        const auto sa = scaled(protoA, la);
        const auto sb = scaled(protoB, lb);
        std::vector<double> y(D);
        for (std::size_t n = 0; n < D; ++n) y[n] = sa[n] + sb[n];

        SeparationConfig cfg;
        cfg.K = 2;
        cfg.T_D = 1;
        cfg.T_spk_start = 150;
        cfg.T_spk_end = 200;
        cfg.guidance_scale = 10.0;
        cfg.guidance_input = GuidanceInput::denoised;
        cfg.seed = 9000 + static_cast<std::uint64_t>(i);

        std::vector<std::vector<double>> refs{sa, sb};
        cfg.guidance_enabled = true;
        const auto eg = hybrid_separate(y, cfg, models, sched, &emb);
        cfg.guidance_enabled = false;
        const auto eu = hybrid_separate(y, cfg, models, sched, &emb);
        swap_g += swap_rate(refs, eg, 400);
        swap_u += swap_rate(refs, eu, 400);
        si_g += pit_assign(refs, eg, &si_sdr).mean;
        si_u += pit_assign(refs, eu, &si_sdr).mean;
    }
    *sw_guided = swap_g / N;
    *sw_unguided = swap_u / N;
    *si_guided = si_g / N;
    *si_unguided = si_u / N;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "mean swap guided %.4f > unguided %.4f", *sw_guided,
                  *sw_unguided);
    out.require(*sw_guided <= *sw_unguided, buf);
    return out;
}

// --- criterion 10: benchmark determinism ------------------------------------

Outcome criterion_benchmark_determinism() {
    Outcome out;
    const char* config_text = R"([schedule]
T = 200
beta_min = 1e-4
beta_max = 2e-2

[solver]
type = "hybrid"
K = 2
T_D = 1
T_spk_start = 75
T_spk_end = 175
seed = 31337
guidance_enabled = false

[prior]
type = "gaussian"
mean = 0.0
var = 0.05

[embedder]
type = "band_energy"
frame_len = 256
hop = 128
bands = 16

[mixture]
duration = 0.25
sample_rate = 8000
f0 = [200.0, 310.0]
n_harmonics = 4

[run]
mixtures = 6
variants = ["unprocessed", "dirac", "hybrid", "hybrid_guided"]
swap_frame = 256
)";
    const auto rc = load_run_config(ConfigFile::parse(config_text));
    const auto tmp = fs::temp_directory_path() / "sepdiff_acceptance_c10";
    fs::remove_all(tmp);
    setenv("SEPDIFF_WORKERS", "4", 1);
    const auto a = run_benchmark(rc, (tmp / "a").string());
    const auto b = run_benchmark(rc, (tmp / "b").string());
    unsetenv("SEPDIFF_WORKERS");
    const auto csv_a = slurp(a.csv_path);
    const auto csv_b = slurp(b.csv_path);
    out.require(!csv_a.empty(), "first benchmark CSV is empty");
    out.require(csv_a == csv_b, "benchmark CSVs differ between runs");
    for (const auto& agg : a.report.aggregates) {
        out.require(agg.failures == 0, agg.solver + " had failures");
    }
    fs::remove_all(tmp);
    return out;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::string& name, const Outcome& o,
                      const std::string& extra = "") {
        std::printf("[%s] criterion %2d: %s%s%s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                    extra.empty() ? "" : " | ", extra.c_str(),
                    o.note.empty() ? "" : (" -- " + o.note).c_str());
        if (!o.pass) ++failures;
    };
    auto guard = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        report(id, name, o);
    };

    guard(1, "closed-form Gaussian posterior (mean within 3 SE, variance within 20%)",
          criterion_gaussian_posterior);
    guard(2, "mixture consistency at every logged step (K=3, D=1024)",
          criterion_mixture_consistency);
    guard(3, "Tweedie exactness at t in {1,50,100,150,200} (rel 1e-9)", criterion_tweedie);
    guard(4, "gradient oracles vs finite differences (1e-4 / 1e-5, D=512, K=2, 20 each)",
          criterion_gradient_oracles);
    guard(5, "guided score step at 1e-3 decreases the speaker loss in >= 95% of 200 trials",
          criterion_guidance_descent);
    guard(6, "no-op guidance equivalences and T_D = 0 identity are bit-exact",
          criterion_noop_equivalences);
    guard(7, "metric suite: scale invariance, assignment oracle, hand case", criterion_metrics);
    guard(8, "stft round trip within 1e-6 (frame 512, hop 128, Hann)", criterion_stft);
    {
        Outcome o;
        double si_g = 0, si_u = 0, sw_g = 0, sw_u = 0;
        try {
            o = criterion_behavioral(&si_g, &si_u, &sw_g, &sw_u);
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        char extra[200];
        std::snprintf(extra, sizeof(extra),
                      "swap %.3f vs %.3f; mean PIT SI-SDR %+.2f dB guided, %+.2f dB unguided",
                      sw_g, sw_u, si_g, si_u);
        report(9, "speaker guidance lowers the mean swap rate over 50 seeded mixtures", o,
               extra);
    }
    guard(10, "benchmark CSVs are byte-identical across runs (worker pool active)",
          criterion_benchmark_determinism);

    std::printf("%s: %d of 10 criteria passed\n", failures == 0 ? "SUCCESS" : "FAILURE",
                10 - failures);
    return failures;
}
