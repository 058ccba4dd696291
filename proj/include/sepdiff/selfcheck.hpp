#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "sepdiff/guidance.hpp"
#include "sepdiff/metrics.hpp"
#include "sepdiff/prior.hpp"
#include "sepdiff/rng.hpp"
#include "sepdiff/schedule.hpp"
#include "sepdiff/signals.hpp"
#include "sepdiff/solvers.hpp"

namespace sepdiff {

// Fast oracle suites behind the `selfcheck` command: each one re-derives an
// independent expectation (direct products, finite differences, closed forms)
// and compares the library against it.

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace selfcheck {

inline CheckResult schedule_suite(const NoiseSchedule& s) {
    CheckResult r{"schedule", true, ""};
    auto fail = [&](const std::string& why) {
        r.passed = false;
        if (!r.detail.empty()) r.detail += "; ";
        r.detail += why;
    };
    if (s.alpha_bar[0] != 1.0) fail("alpha_bar[0] != 1");
    if (s.sigma[0] != 0.0) fail("sigma[0] != 0");
    long double prod = 1.0L;
    for (int t = 1; t <= s.T; ++t) {
        if (!(s.beta[t] > 0.0 && s.beta[t] < 1.0)) fail("beta out of (0,1)");
        if (t > 1 && s.beta[t] < s.beta[t - 1]) fail("beta not non-decreasing");
        if (!(s.alpha_bar[t] < s.alpha_bar[t - 1])) fail("alpha_bar not strictly decreasing");
        if (!(s.sigma[t] > s.sigma[t - 1])) fail("sigma not strictly increasing");
        prod *= 1.0L - static_cast<long double>(s.beta[t]);
        const double ref = static_cast<double>(prod);
        if (std::abs(s.alpha_bar[t] - ref) > 1e-12 * ref) fail("alpha_bar product mismatch");
        // independent re-derivation of the ancestral posterior std
        const double rederived = std::sqrt(s.beta[t] * (1.0 - s.alpha_bar[t - 1]) /
                                           (1.0 - s.alpha_bar[t]));
        const double denom = std::max(1e-300, rederived);
        if (std::abs(s.sigma_post[t] - rederived) > 1e-12 * denom) {
            fail("sigma_post mismatch at t=" + std::to_string(t));
        }
        if (s.sigma_post[t] > std::sqrt(s.beta[t]) * (1.0 + 1e-12)) {
            fail("sigma_post exceeds sqrt(beta)");
        }
        for (double churn : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double sh = sigma_hat(s, t, churn);
            if (s.sigma[t] * s.sigma[t] - sh * sh < 0.0) fail("negative re-injection variance");
            if (sh < s.sigma[t - 1] - 1e-15 || sh > s.sigma[t] + 1e-15) {
                fail("sigma_hat outside [sigma_{t-1}, sigma_t]");
            }
        }
    }
    return r;
}

inline CheckResult score_fd_suite(const NoiseSchedule& sched) {
    CheckResult r{"score finite differences", true, ""};
    const std::size_t D = 6;
    RandomStream rs(2024, "selfcheck/score");
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> mean(D), var(D), x(D);
        for (std::size_t i = 0; i < D; ++i) {
            mean[i] = rs.normal(step_counter(trial, 0, i));
            var[i] = 0.4 + rs.uniform(step_counter(trial, 1, i));
            x[i] = 2.0 * rs.normal(step_counter(trial, 2, i));
        }
        GaussianPrior gp(mean, var);
        const int t = 1 + static_cast<int>(rs.value(step_counter(trial, 3, 0)) %
                                           static_cast<std::uint64_t>(sched.T));
        const auto sc = gaussian_score(gp, sched, x, t);
        for (std::size_t i = 0; i < D; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (gaussian_log_density(gp, sched, xp, t) -
                               gaussian_log_density(gp, sched, xm, t)) /
                              (2.0 * h);
            worst = std::max(worst, std::abs(fd - sc[i]) / std::max(1.0, std::abs(fd)));
        }
    }
    if (worst > 1e-6) {
        r.passed = false;
        r.detail = "worst relative error " + std::to_string(worst);
    }
    return r;
}

inline CheckResult tweedie_suite(const NoiseSchedule& sched) {
    CheckResult r{"tweedie exactness", true, ""};
    const std::size_t D = 4;
    GaussianPrior gp(std::vector<double>(D, 0.7), std::vector<double>(D, 0.6));
    RandomStream rs(7, "selfcheck/tweedie");
    double worst = 0.0;
    for (int t : {1, sched.T / 4, sched.T / 2, sched.T}) {
        std::vector<double> x(D);
        for (std::size_t i = 0; i < D; ++i) x[i] = rs.normal(step_counter(t, 0, i));
        const auto sc = gaussian_score(gp, sched, x, t);
        const auto x0 = tweedie_denoise(sched, x, sc, t);
        const double ab = sched.alpha_bar[t];
        for (std::size_t i = 0; i < D; ++i) {
            const double denom = ab * gp.var[i] + (1.0 - ab);
            const double analytic =
                (std::sqrt(ab) * gp.var[i] * x[i] + (1.0 - ab) * gp.mean[i]) / denom;
            worst = std::max(worst,
                             std::abs(x0[i] - analytic) / std::max(1.0, std::abs(analytic)));
        }
    }
    if (worst > 1e-9) {
        r.passed = false;
        r.detail = "worst relative error " + std::to_string(worst);
    }
    return r;
}

inline CheckResult guidance_fd_suite() {
    CheckResult r{"guidance gradient", true, ""};
    const std::size_t D = 192;
    BandEnergyEmbedder emb(64, 32, 8);
    RandomStream rs(99, "selfcheck/guidance");
    std::vector<std::vector<double>> tracks(2, std::vector<double>(D));
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < D; ++i) {
            tracks[k][i] = rs.normal(step_counter(0, k, i));
        }
    }
    const auto g = speaker_guidance_gradient(tracks, emb);
    if (g.raw_norm <= 0.0) {
        return {"guidance gradient", false, "gradient unexpectedly null"};
    }
    auto loss_of = [&](const std::vector<std::vector<double>>& xs) {
        std::vector<EmbeddingMatrix> es;
        for (const auto& x : xs) es.push_back(emb.embed(x));
        return speaker_loss(es);
    };
    const double h = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < D; i += 37) {
            auto xp = tracks, xm = tracks;
            xp[k][i] += h;
            xm[k][i] -= h;
            const double fd = (loss_of(xp) - loss_of(xm)) / (2.0 * h);
            const double an = g.per_track[k][i] * g.raw_norm;
            worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd)));
        }
    }
    if (worst > 1e-4) {
        r.passed = false;
        r.detail = "worst relative error " + std::to_string(worst);
    }
    return r;
}

inline CheckResult dps_gradient_suite(const NoiseSchedule& sched) {
    CheckResult r{"dps likelihood gradient", true, ""};
    const std::size_t D = 8;
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    RandomStream rs(5, "selfcheck/dps");
    std::vector<double> y(D);
    for (std::size_t i = 0; i < D; ++i) y[i] = rs.normal(step_counter(0, 9, i));
    TrackSet ts;
    ts.anchor = 0;
    ts.t = sched.T / 2;
    ts.tracks.assign(2, std::vector<double>(D));
    std::vector<GaussianScoreModel> owned;
    owned.reserve(2);
    for (int k = 0; k < 2; ++k) {
        std::vector<double> mean(D), var(D);
        for (std::size_t i = 0; i < D; ++i) {
            mean[i] = rs.normal(step_counter(1, k, i));
            var[i] = 0.5 + 0.5 * rs.uniform(step_counter(2, k, i));
            ts.tracks[k][i] = rs.normal(step_counter(3, k, i));
        }
        owned.emplace_back(GaussianPrior(mean, var), sp);
    }
    std::vector<const ScoreModel*> models{&owned[0], &owned[1]};
    const auto grads = dps_likelihood_gradient(y, ts, models, sched, DpsGradientMode::exact);
    auto objective = [&](const TrackSet& probe) {
        std::vector<double> resid(y);
        for (int k = 0; k < 2; ++k) {
            const auto sc = models[k]->score(probe.tracks[k], probe.t);
            const auto x0 = tweedie_denoise(sched, probe.tracks[k], sc, probe.t);
            for (std::size_t i = 0; i < D; ++i) resid[i] -= x0[i];
        }
        double acc = 0.0;
        for (double v : resid) acc += v * v;
        return acc;
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < D; ++i) {
            auto tp = ts, tm = ts;
            tp.tracks[k][i] += h;
            tm.tracks[k][i] -= h;
            const double fd = (objective(tp) - objective(tm)) / (2.0 * h);
            worst = std::max(worst,
                             std::abs(fd - grads[k][i]) / std::max(1.0, std::abs(fd)));
        }
    }
    if (worst > 1e-5) {
        r.passed = false;
        r.detail = "worst relative error " + std::to_string(worst);
    }
    return r;
}

inline CheckResult stft_suite() {
    CheckResult r{"stft round trip", true, ""};
    RandomStream rs(41, "selfcheck/stft");
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(4096);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = rs.normal(i);
    }
    const auto spec = stft(w, 512, 128);
    const auto back = istft(spec, 512, 128, w.sample_rate);
    double worst = 0.0;
    for (std::size_t i = 512; i + 512 < w.samples.size(); ++i) {
        worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
    }
    if (worst > 1e-6) {
        r.passed = false;
        r.detail = "interior max error " + std::to_string(worst);
    }
    return r;
}

inline CheckResult posterior_suite(const NoiseSchedule& sched) {
    CheckResult r{"gaussian posterior sampling", true, ""};
    auto sp = std::make_shared<const NoiseSchedule>(sched);
    GaussianScoreModel m1(GaussianPrior({1.0}, {0.5}), sp);
    GaussianScoreModel m2(GaussianPrior({-1.0}, {0.5}), sp);
    std::vector<const ScoreModel*> models{&m1, &m2};
    SeparationConfig cfg;
    cfg.K = 2;
    cfg.solver = SolverKind::hybrid;
    cfg.T_dirac = sched.T;
    cfg.T_D = 0;
    cfg.T_spk_start = 0;
    cfg.T_spk_end = 0;
    cfg.guidance_enabled = false;
    const std::vector<double> y{0.0};
    const int n = 400;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        cfg.seed = 900 + static_cast<std::uint64_t>(i);
        const auto est = hybrid_separate(y, cfg, models, sched);
        sum += est[1][0];
        sum2 += est[1][0] * est[1][0];
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // closed form: mean -1, variance 0.25
    const double se = std::sqrt(var / n);
    if (std::abs(mean + 1.0) > 4.0 * se) {
        r.passed = false;
        r.detail = "mean " + std::to_string(mean) + " vs -1";
    }
    if (var < 0.25 * 0.7 || var > 0.25 * 1.3) {
        r.passed = false;
        r.detail += (r.detail.empty() ? "" : "; ") + std::string("variance ") +
                    std::to_string(var) + " vs 0.25";
    }
    return r;
}

}  // namespace selfcheck

// Runs every oracle suite and prints a pass/fail matrix. Returns true when
// all suites pass.
inline bool run_selfcheck(std::vector<CheckResult>* out = nullptr) {
    const auto sched = linear_beta_schedule(200, 1e-4, 2e-2);
    std::vector<CheckResult> results;
    results.push_back(selfcheck::schedule_suite(sched));
    results.push_back(selfcheck::score_fd_suite(sched));
    results.push_back(selfcheck::tweedie_suite(sched));
    results.push_back(selfcheck::guidance_fd_suite());
    results.push_back(selfcheck::dps_gradient_suite(sched));
    results.push_back(selfcheck::stft_suite());
    results.push_back(selfcheck::posterior_suite(sched));
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : ": ", r.detail.c_str());
        all = all && r.passed;
    }
    if (out != nullptr) *out = results;
    return all;
}

}  // namespace sepdiff
