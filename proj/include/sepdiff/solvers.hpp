#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/guidance.hpp"
#include "sepdiff/prior.hpp"
#include "sepdiff/rng.hpp"
#include "sepdiff/schedule.hpp"

namespace sepdiff {

// The K per-source states. Tracks live at signal scale (the sigma view of the
// schedule): summing them against the observed mixture is scale-consistent at
// every timestep.
struct TrackSet {
    std::vector<std::vector<double>> tracks;
    int t = 0;
    int anchor = 0;

    std::size_t K() const { return tracks.size(); }
    std::size_t dim() const { return tracks.empty() ? 0 : tracks.front().size(); }
};

enum class SolverKind { dps, dsg, dirac, hybrid };
enum class GammaMode { dps_const, dsg };
enum class DiracMode { anchor, soft };
enum class DiracSign { corrective, inverted };
enum class GuidanceMode { score, direct };
// What the speaker embedder sees: the raw diffusion state, or the Tweedie
// denoised estimate with the gradient chained back through the denoiser.
// The denoised path mirrors a speaker extractor that carries its own
// denoiser stage; at high noise it is what keeps the guidance gradient
// pointed at source structure instead of at the injected noise.
enum class GuidanceInput { denoised, state };
enum class XiMode { inv_sigma2_k, constant };
enum class DpsGradientMode { automatic, exact, detached };

struct SeparationConfig {
    int K = 2;
    SolverKind solver = SolverKind::hybrid;
    int T_dirac = 200;
    int T_D = 1;
    int T_spk_start = 75;
    int T_spk_end = 175;
    double gamma = 0.1;
    GammaMode gamma_mode = GammaMode::dps_const;
    XiMode xi_mode = XiMode::inv_sigma2_k;
    double xi_scale = 1.0;
    DiracMode dirac_mode = DiracMode::anchor;
    DiracSign dirac_sign = DiracSign::corrective;
    GuidanceMode guidance_mode = GuidanceMode::score;
    GuidanceInput guidance_input = GuidanceInput::denoised;
    double churn = 0.0;
    std::uint64_t seed = 0;
    bool guidance_enabled = false;
    double guidance_scale = 1.0;
    int anchor = 0;

    void validate(int T) const {
        if (K < 1) throw ConfigError("K must be >= 1");
        if (T_D < 0) throw ConfigError("T_D must be >= 0");
        if (!(0 <= T_spk_start && T_spk_start <= T_spk_end && T_spk_end <= T_dirac &&
              T_dirac <= T)) {
            throw ConfigError("need 0 <= T_spk_start <= T_spk_end <= T_dirac <= T");
        }
        if (churn < 0.0 || churn > 1.0) throw ConfigError("churn must lie in [0, 1]");
        if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
        if (guidance_scale < 0.0) throw ConfigError("guidance_scale must be >= 0");
        if (anchor < 0 || anchor >= K) throw ConfigError("anchor index outside [0, K)");
    }
};

// Step record handed to an optional observer: residual_inf is measured right
// after the anchor projection, state points at the post-update TrackSet.
struct SolverStep {
    enum class Phase { dirac, refine };
    Phase phase;
    int t;
    double residual_inf;
    const TrackSet* state;
};
using StepObserver = std::function<void(const SolverStep&)>;

namespace detail {

inline void check_tracks(std::span<const double> y, const TrackSet& ts) {
    if (ts.tracks.empty()) throw ShapeError("track set is empty");
    for (const auto& tr : ts.tracks) {
        if (tr.size() != y.size()) {
            throw ShapeError("track length " + std::to_string(tr.size()) +
                             " != mixture length " + std::to_string(y.size()));
        }
    }
    if (ts.anchor < 0 || static_cast<std::size_t>(ts.anchor) >= ts.K()) {
        throw ShapeError("anchor index outside track set");
    }
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double residual_inf(std::span<const double> y, const TrackSet& ts) {
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double s = 0.0;
        for (const auto& tr : ts.tracks) s += tr[i];
        worst = std::max(worst, std::abs(y[i] - s));
    }
    return worst;
}

inline double residual_l2(std::span<const double> y,
                          const std::vector<std::vector<double>>& xs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double s = 0.0;
        for (const auto& x : xs) s += x[i];
        const double d = y[i] - s;
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace detail

// Replaces the anchor track by y - sum of the others; the track sum then
// equals y up to float rounding.
inline void anchor_project(std::span<const double> y, TrackSet& ts) {
    detail::check_tracks(y, ts);
    auto& xa = ts.tracks[static_cast<std::size_t>(ts.anchor)];
    for (std::size_t i = 0; i < y.size(); ++i) {
        double others = 0.0;
        for (std::size_t k = 0; k < ts.K(); ++k) {
            if (static_cast<int>(k) == ts.anchor) continue;
            others += ts.tracks[k][i];
        }
        xa[i] = y[i] - others;
    }
}

// Per-track gradients of ||y - sum_k x_hat_0^k||^2 with respect to the
// timestep-t states. Uses the exact chain rule through each model's Tweedie
// map when the model provides measurement_vjp, otherwise the detached
// approximation g^k = -(2 / sqrt(alpha_bar_t)) (y - sum x_hat_0).
inline std::vector<std::vector<double>> dps_likelihood_gradient(
    std::span<const double> y, const TrackSet& ts,
    const std::vector<const ScoreModel*>& models, const NoiseSchedule& sched,
    DpsGradientMode mode = DpsGradientMode::automatic) {
    detail::check_tracks(y, ts);
    if (models.size() != ts.K()) {
        throw ConfigError("need one score model per track (" + std::to_string(models.size()) +
                          " given for " + std::to_string(ts.K()) + " tracks)");
    }
    for (const auto* m : models) {
        if (m == nullptr) throw ConfigError("missing score model for a track");
    }
    const int t = ts.t;
    sched.check_t(t, 1);
    const std::size_t D = y.size();
    const std::size_t K = ts.K();

    std::vector<double> residual(y.begin(), y.end());
    std::vector<std::vector<double>> scores(K);
    for (std::size_t k = 0; k < K; ++k) {
        scores[k] = models[k]->score(ts.tracks[k], t);
        const auto x0 = tweedie_denoise(sched, ts.tracks[k], scores[k], t);
        for (std::size_t i = 0; i < D; ++i) residual[i] -= x0[i];
    }

    const double sab = std::sqrt(sched.alpha_bar[t]);
    std::vector<std::vector<double>> grads(K);
    for (std::size_t k = 0; k < K; ++k) {
        const bool exact = mode == DpsGradientMode::exact ||
                           (mode == DpsGradientMode::automatic &&
                            models[k]->has_measurement_vjp());
        if (mode == DpsGradientMode::exact && !models[k]->has_measurement_vjp()) {
            throw ConfigError("exact DPS gradient requested but model lacks measurement_vjp");
        }
        grads[k].assign(D, 0.0);
        if (exact) {
            models[k]->measurement_vjp(ts.tracks[k], t, residual, grads[k]);
            for (double& g : grads[k]) g *= -2.0;
        } else {
            for (std::size_t i = 0; i < D; ++i) grads[k][i] = -2.0 / sab * residual[i];
        }
    }
    return grads;
}

// Guidance strength: a constant for plain DPS, the noise-proportional sphere
// radius sqrt(D) * sigma_t^post for DSG (the caller normalizes the gradient).
inline double guidance_coefficient(GammaMode mode, const NoiseSchedule& sched, int t,
                                   double gamma, std::size_t D) {
    sched.check_t(t, 1);
    switch (mode) {
        case GammaMode::dps_const:
            return gamma;
        case GammaMode::dsg:
            return std::sqrt(static_cast<double>(D)) * sched.sigma_post[t];
    }
    return gamma;
}

// Posterior score with the Dirac mixture likelihood: per track,
// s_theta(x^k, t) - xi_t (y - sum_j x^j). xi_t carries the caller's sign
// choice; the residual term vanishes whenever the tracks sum to y.
inline std::vector<std::vector<double>> dirac_posterior_score(
    std::span<const double> y, const TrackSet& ts,
    const std::vector<const ScoreModel*>& models, const NoiseSchedule& sched, double xi_t) {
    detail::check_tracks(y, ts);
    if (models.size() != ts.K()) throw ConfigError("need one score model per track");
    sched.check_t(ts.t, 1);
    std::vector<double> residual(y.begin(), y.end());
    for (const auto& tr : ts.tracks) {
        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= tr[i];
    }
    std::vector<std::vector<double>> out(ts.K());
    for (std::size_t k = 0; k < ts.K(); ++k) {
        out[k] = models[k]->score(ts.tracks[k], ts.t);
        for (std::size_t i = 0; i < residual.size(); ++i) {
            out[k][i] -= xi_t * residual[i];
        }
    }
    return out;
}

namespace detail {

// Signal-scale (sigma view) score: sqrt(ab_t) * score(sqrt(ab_t) * x, t).
inline std::vector<double> sigma_view_score(const ScoreModel& model, const NoiseSchedule& sched,
                                            const std::vector<double>& x, int t) {
    const double sab = std::sqrt(sched.alpha_bar[t]);
    std::vector<double> xt(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xt[i] = sab * x[i];
    std::vector<double> s(x.size());
    model.score(xt, t, s);
    for (double& v : s) v *= sab;
    return s;
}

// Unit-norm speaker-guidance direction for the current track states. In
// denoised mode the embedder sees the Tweedie estimates and the gradient is
// pulled back through the denoiser via measurement_vjp (detached identity
// when a model cannot provide it).
inline TrackGradients guidance_direction(const TrackSet& ts,
                                         const std::vector<std::vector<double>>& prior_scores,
                                         const std::vector<const ScoreModel*>& models,
                                         const NoiseSchedule& sched, int t,
                                         GuidanceInput input, const Embedder& embedder) {
    if (input == GuidanceInput::state) {
        return speaker_guidance_gradient(ts.tracks, embedder);
    }
    const std::size_t K = ts.K();
    const std::size_t D = ts.dim();
    const double s2 = sched.sigma[t] * sched.sigma[t];
    const double sab = std::sqrt(sched.alpha_bar[t]);
    std::vector<std::vector<double>> x0(K, std::vector<double>(D));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < D; ++i) {
            x0[k][i] = ts.tracks[k][i] + s2 * prior_scores[k][i];
        }
    }
    std::vector<EmbeddingMatrix> embeddings(K);
    for (std::size_t k = 0; k < K; ++k) embeddings[k] = embedder.embed(x0[k]);
    const auto rows = speaker_loss_grad(embeddings);

    TrackGradients out;
    out.per_track.resize(K);
    double norm2 = 0.0;
    std::vector<double> xv(D), pulled(D);
    for (std::size_t k = 0; k < K; ++k) {
        auto gx0 = embedder.embed_vjp(x0[k], rows[k]);
        if (models[k]->has_measurement_vjp()) {
            for (std::size_t i = 0; i < D; ++i) xv[i] = sab * ts.tracks[k][i];
            models[k]->measurement_vjp(xv, t, gx0, pulled);
            out.per_track[k].resize(D);
            for (std::size_t i = 0; i < D; ++i) out.per_track[k][i] = sab * pulled[i];
        } else {
            out.per_track[k] = std::move(gx0);
        }
        for (double v : out.per_track[k]) norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) {
        for (auto& g : out.per_track) std::fill(g.begin(), g.end(), 0.0);
        out.raw_norm = 0.0;
        return out;
    }
    for (auto& g : out.per_track) {
        for (double& v : g) v /= norm;
    }
    out.raw_norm = norm;
    return out;
}

}  // namespace detail

// DPS refinement: `steps` descent updates on ||y - sum x_hat_0||^2, run at
// nominal timesteps s = steps .. 1 (capped at T). steps = 0 is the identity.
// Aborts when the residual grows tenfold from entry or a track goes
// non-finite.
inline void dps_refine(std::span<const double> y, TrackSet& ts,
                       const std::vector<const ScoreModel*>& models, const NoiseSchedule& sched,
                       int steps, GammaMode gamma_mode, double gamma,
                       DpsGradientMode grad_mode = DpsGradientMode::automatic,
                       const StepObserver& observer = {}) {
    if (steps < 0) throw ConfigError("refinement steps must be >= 0");
    if (steps == 0) return;
    detail::check_tracks(y, ts);
    const std::size_t D = y.size();
    const std::size_t K = ts.K();

    // Entry residual of the objective, for the divergence guard.
    double entry = 0.0;
    {
        TrackSet probe = ts;
        probe.t = std::min(steps, sched.T);
        std::vector<std::vector<double>> x0s(K);
        for (std::size_t k = 0; k < K; ++k) {
            const double sab = std::sqrt(sched.alpha_bar[probe.t]);
            std::vector<double> xv(D);
            for (std::size_t i = 0; i < D; ++i) xv[i] = sab * ts.tracks[k][i];
            const auto sc = models[k]->score(xv, probe.t);
            x0s[k] = tweedie_denoise(sched, xv, sc, probe.t);
        }
        entry = detail::residual_l2(y, x0s);
    }

    for (int s = steps; s >= 1; --s) {
        const int t = std::min(s, sched.T);
        const double sab = std::sqrt(sched.alpha_bar[t]);
        TrackSet vp;
        vp.t = t;
        vp.anchor = ts.anchor;
        vp.tracks.assign(K, std::vector<double>(D));
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < D; ++i) vp.tracks[k][i] = sab * ts.tracks[k][i];
        }
        const auto grads = dps_likelihood_gradient(y, vp, models, sched, grad_mode);
        if (gamma_mode == GammaMode::dsg) {
            double norm2 = 0.0;
            for (const auto& g : grads) {
                for (double v : g) norm2 += v * v;
            }
            const double norm = std::sqrt(norm2);
            const double radius = guidance_coefficient(GammaMode::dsg, sched, t, gamma, D);
            if (norm >= 1e-12) {
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t i = 0; i < D; ++i) {
                        vp.tracks[k][i] -= radius * grads[k][i] / norm;
                    }
                }
            }
        } else {
            const double coeff = guidance_coefficient(GammaMode::dps_const, sched, t, gamma, D);
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < D; ++i) vp.tracks[k][i] -= coeff * grads[k][i];
            }
        }
        std::vector<std::vector<double>> x0s(K);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < D; ++i) ts.tracks[k][i] = vp.tracks[k][i] / sab;
            if (!detail::all_finite(ts.tracks[k])) {
                throw DivergenceError("refinement step " + std::to_string(s) + " track " +
                                      std::to_string(k) + " produced non-finite values");
            }
            const auto sc = models[k]->score(vp.tracks[k], t);
            x0s[k] = tweedie_denoise(sched, vp.tracks[k], sc, t);
        }
        const double now = detail::residual_l2(y, x0s);
        if (now > 10.0 * std::max(entry, 1e-12)) {
            throw DivergenceError("refinement diverged at step " + std::to_string(s) +
                                  ": residual " + std::to_string(now) + " vs entry " +
                                  std::to_string(entry));
        }
        if (observer) {
            ts.t = 0;
            const SolverStep info{SolverStep::Phase::refine, s, detail::residual_inf(y, ts), &ts};
            observer(info);
        }
    }
    ts.t = 0;
}

// The separation-oriented sampler: an anchor-constrained Dirac stage over
// t = T_dirac .. 1 with optional speaker guidance inside
// [T_spk_start, T_spk_end], followed by T_D DPS refinement steps and a final
// anchor projection. Per Dirac step:
//   anchor projection; per-track sigma-view scores; guidance; score
//   differences against the anchor; a sigma-step update; noise re-injection
//   of std sqrt(sigma_t^2 - sigma_hat_t^2).
//
// The sigma step splits the score-difference update across the free tracks'
// common mode and its orthogonal complement,
//   kappa_perp = (1 + lambda^2) / 2,   kappa_cm = (1 + lambda^2 K) / (2 K),
// with lambda^2 the re-injected fraction of the step's noise budget. The
// anchor constraint absorbs the mixture's measurement noise, which thins the
// common mode of the annealed ensemble; the split restores the correct
// terminal dispersion (exactly so for symmetric Gaussian sources) while
// reducing to the plain probability-flow step at churn = 1 and to the
// noise-matched stochastic step at churn = 0 in the orthogonal modes.
inline std::vector<std::vector<double>> hybrid_separate(
    std::span<const double> y, const SeparationConfig& cfg,
    const std::vector<const ScoreModel*>& models, const NoiseSchedule& sched,
    const Embedder* embedder = nullptr, const StepObserver& observer = {}) {
    cfg.validate(sched.T);
    if (models.size() != static_cast<std::size_t>(cfg.K)) {
        throw ConfigError("need one score model per source");
    }
    const std::size_t D = y.size();
    for (const auto* m : models) {
        if (m == nullptr) throw ConfigError("missing score model for a track");
        if (m->dim() != D) throw ConfigError("score model dimension != mixture length");
    }
    const bool window_nonempty = cfg.T_spk_end >= 1 && cfg.T_spk_start <= cfg.T_dirac;
    const bool guidance_active = cfg.guidance_enabled && window_nonempty;
    if (guidance_active && embedder == nullptr) {
        throw ConfigError("guidance enabled with a nonempty window but no embedder given");
    }
    if (guidance_active && D < embedder->min_length()) {
        throw ConfigError("mixture shorter than one embedder frame");
    }

    const std::size_t K = static_cast<std::size_t>(cfg.K);
    const int t_start = cfg.T_dirac;
    RandomStream init_rs(cfg.seed, "hybrid/init");
    RandomStream noise_rs(cfg.seed, "hybrid/noise");

    TrackSet ts;
    ts.anchor = cfg.anchor;
    ts.t = t_start;
    ts.tracks.assign(K, std::vector<double>(D));
    // x_T ~ N(0, I) in the model's own coordinates; at signal scale that is a
    // draw of std 1/sqrt(alpha_bar) at the starting level.
    const double init_scale = 1.0 / std::sqrt(sched.alpha_bar[t_start]);
    for (std::size_t k = 0; k < K; ++k) {
        init_rs.fill_normal(step_counter(t_start, static_cast<int>(k)), ts.tracks[k]);
        for (double& v : ts.tracks[k]) v *= init_scale;
    }

    std::vector<std::vector<double>> scores(K);
    for (int t = t_start; t >= 1; --t) {
        ts.t = t;
        if (cfg.dirac_mode == DiracMode::anchor) anchor_project(y, ts);
        const double resid = detail::residual_inf(y, ts);
        for (std::size_t k = 0; k < K; ++k) {
            scores[k] = detail::sigma_view_score(*models[k], sched, ts.tracks[k], t);
        }

        const bool in_window = guidance_active && t >= cfg.T_spk_start && t <= cfg.T_spk_end;
        if (in_window) {
            const auto g = detail::guidance_direction(ts, scores, models, sched, t,
                                                      cfg.guidance_input, *embedder);
            if (g.raw_norm > 0.0) {
                const double r = cfg.guidance_scale * std::sqrt(static_cast<double>(D)) *
                                 sched.sigma_post[t];
                if (cfg.guidance_mode == GuidanceMode::score) {
                    scores = apply_guidance(scores, g.per_track, r);
                } else {
                    // Direct state update: x <- x - r * g, scores untouched.
                    for (std::size_t k = 0; k < K; ++k) {
                        for (std::size_t i = 0; i < D; ++i) {
                            ts.tracks[k][i] -= r * g.per_track[k][i];
                        }
                    }
                }
            }
        }

        if (cfg.dirac_mode == DiracMode::soft) {
            // Dirac posterior correction: score - xi (y - sum x), with the
            // sign choice folded into xi.
            double xi = cfg.xi_mode == XiMode::inv_sigma2_k
                            ? cfg.xi_scale / (sched.sigma[t] * sched.sigma[t] *
                                              static_cast<double>(K))
                            : cfg.xi_scale;
            if (cfg.dirac_sign == DiracSign::corrective) xi = -xi;
            std::vector<double> residual(y.begin(), y.end());
            for (const auto& tr : ts.tracks) {
                for (std::size_t i = 0; i < D; ++i) residual[i] -= tr[i];
            }
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < D; ++i) scores[k][i] -= xi * residual[i];
            }
        }

        const double s_hi2 = sched.sigma[t] * sched.sigma[t];
        const double s_lo2 = sched.sigma[t - 1] * sched.sigma[t - 1];
        const double shat = sigma_hat(sched, t, cfg.churn);
        const double dvar = s_hi2 - s_lo2;
        const double nvar = std::max(0.0, s_hi2 - shat * shat);
        const double lambda2 = dvar > 0.0 ? nvar / dvar : 0.0;
        const double k_perp = 0.5 * (1.0 + lambda2);
        const double k_cm =
            (1.0 + lambda2 * static_cast<double>(K)) / (2.0 * static_cast<double>(K));
        const double noise_std = std::sqrt(nvar);

        if (cfg.dirac_mode == DiracMode::anchor) {
            const std::size_t a = static_cast<std::size_t>(ts.anchor);
            const std::size_t n_free = K - 1;
            if (n_free > 0) {
                std::vector<double> cm(D, 0.0);
                for (std::size_t k = 0; k < K; ++k) {
                    if (k == a) continue;
                    for (std::size_t i = 0; i < D; ++i) {
                        cm[i] += (scores[k][i] - scores[a][i]) / static_cast<double>(n_free);
                    }
                }
                for (std::size_t k = 0; k < K; ++k) {
                    if (k == a) continue;
                    for (std::size_t i = 0; i < D; ++i) {
                        const double ds = scores[k][i] - scores[a][i];
                        ts.tracks[k][i] += dvar * (k_perp * (ds - cm[i]) + k_cm * cm[i]);
                    }
                }
            }
        } else {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < D; ++i) {
                    ts.tracks[k][i] += dvar * k_perp * scores[k][i];
                }
            }
        }
        if (noise_std > 0.0) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < D; ++i) {
                    ts.tracks[k][i] +=
                        noise_std *
                        noise_rs.normal(step_counter(t, static_cast<int>(k), i));
                }
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (!detail::all_finite(ts.tracks[k])) {
                throw DivergenceError("dirac step t=" + std::to_string(t) + " track " +
                                      std::to_string(k) + " produced non-finite values");
            }
        }
        if (observer) {
            const SolverStep info{SolverStep::Phase::dirac, t, resid, &ts};
            observer(info);
        }
    }
    ts.t = 0;

    if (cfg.T_D > 0) {
        dps_refine(y, ts, models, sched, cfg.T_D, cfg.gamma_mode, cfg.gamma,
                   DpsGradientMode::automatic, observer);
    }
    anchor_project(y, ts);
    return std::move(ts.tracks);
}

// Plain DPS / DSG posterior sampling: ancestral reverse diffusion per track
// with a likelihood-gradient correction after each ancestral update. DPS uses
// a constant step gamma on the raw gradient, DSG moves by the sphere radius
// sqrt(D) sigma_t^post along the normalized gradient.
inline std::vector<std::vector<double>> vp_posterior_separate(
    std::span<const double> y, const SeparationConfig& cfg,
    const std::vector<const ScoreModel*>& models, const NoiseSchedule& sched,
    const StepObserver& observer = {}) {
    cfg.validate(sched.T);
    if (models.size() != static_cast<std::size_t>(cfg.K)) {
        throw ConfigError("need one score model per source");
    }
    const std::size_t D = y.size();
    const std::size_t K = static_cast<std::size_t>(cfg.K);
    for (const auto* m : models) {
        if (m == nullptr) throw ConfigError("missing score model for a track");
        if (m->dim() != D) throw ConfigError("score model dimension != mixture length");
    }
    RandomStream init_rs(cfg.seed, "vp/init");
    RandomStream noise_rs(cfg.seed, "vp/noise");

    TrackSet ts;
    ts.anchor = cfg.anchor;
    ts.t = sched.T;
    ts.tracks.assign(K, std::vector<double>(D));
    for (std::size_t k = 0; k < K; ++k) {
        init_rs.fill_normal(step_counter(sched.T, static_cast<int>(k)), ts.tracks[k]);
    }

    for (int t = sched.T; t >= 1; --t) {
        ts.t = t;
        const auto grads = dps_likelihood_gradient(y, ts, models, sched);
        const double beta = sched.beta[t];
        const double inv_sa = 1.0 / std::sqrt(1.0 - beta);
        const double post = sched.sigma_post[t];

        double gnorm = 0.0;
        if (cfg.solver == SolverKind::dsg) {
            double n2 = 0.0;
            for (const auto& g : grads) {
                for (double v : g) n2 += v * v;
            }
            gnorm = std::sqrt(n2);
        }
        const double radius = cfg.solver == SolverKind::dsg
                                  ? guidance_coefficient(GammaMode::dsg, sched, t, cfg.gamma, D)
                                  : 0.0;

        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> sc(D);
            models[k]->score(ts.tracks[k], t, sc);
            for (std::size_t i = 0; i < D; ++i) {
                double x = (ts.tracks[k][i] + beta * sc[i]) * inv_sa;
                x += post * noise_rs.normal(step_counter(t, static_cast<int>(k), i));
                if (cfg.solver == SolverKind::dsg) {
                    if (gnorm >= 1e-12) x -= radius * grads[k][i] / gnorm;
                } else {
                    x -= cfg.gamma * grads[k][i];
                }
                ts.tracks[k][i] = x;
            }
            if (!detail::all_finite(ts.tracks[k])) {
                throw DivergenceError("posterior sampling step t=" + std::to_string(t) +
                                      " track " + std::to_string(k) +
                                      " produced non-finite values");
            }
        }
        if (observer) {
            const SolverStep info{SolverStep::Phase::dirac, t, detail::residual_inf(y, ts), &ts};
            observer(info);
        }
    }
    ts.t = 0;
    anchor_project(y, ts);
    return std::move(ts.tracks);
}

// Solver dispatch. `dirac` is the hybrid pipeline with guidance forced off.
inline std::vector<std::vector<double>> separate(std::span<const double> y,
                                                 const SeparationConfig& cfg,
                                                 const std::vector<const ScoreModel*>& models,
                                                 const NoiseSchedule& sched,
                                                 const Embedder* embedder = nullptr,
                                                 const StepObserver& observer = {}) {
    switch (cfg.solver) {
        case SolverKind::dps:
        case SolverKind::dsg:
            return vp_posterior_separate(y, cfg, models, sched, observer);
        case SolverKind::dirac: {
            SeparationConfig plain = cfg;
            plain.guidance_enabled = false;
            return hybrid_separate(y, plain, models, sched, embedder, observer);
        }
        case SolverKind::hybrid:
            return hybrid_separate(y, cfg, models, sched, embedder, observer);
    }
    throw ConfigError("unknown solver kind");
}

}  // namespace sepdiff
