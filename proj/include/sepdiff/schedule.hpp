#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"

namespace sepdiff {

// Discrete variance-preserving diffusion schedule. All arrays are indexed by
// timestep t: beta[t] is defined for t in [1, T] (beta[0] is an unused
// placeholder), alpha_bar/sigma/sigma_post cover t in [0, T] with
// alpha_bar[0] = 1, sigma[0] = 0, sigma_post[0] = 0.
//
// sigma is the variance-exploding view of the same process,
// sigma_t = sqrt((1 - alpha_bar_t) / alpha_bar_t): a state x_t produced by
// x_t = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps satisfies
// x_t / sqrt(alpha_bar_t) = x_0 + sigma_t eps. Solvers that reason about
// signal-scale tracks use this view; score models stay parameterized by t.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;        // size T+1, beta[0] unused
    std::vector<double> alpha_bar;   // size T+1
    std::vector<double> sigma;       // size T+1
    std::vector<double> sigma_post;  // size T+1, DDPM ancestral posterior std

    void check_t(int t, int lo) const {
        if (t < lo || t > T) {
            throw IndexError("timestep " + std::to_string(t) + " outside [" +
                             std::to_string(lo) + ", " + std::to_string(T) + "]");
        }
    }
};

inline NoiseSchedule linear_beta_schedule(int T, double beta_min, double beta_max) {
    if (T < 1) {
        throw ParamError("schedule needs T >= 1");
    }
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max) {
        throw ParamError("beta range must satisfy 0 < beta_min <= beta_max < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.sigma.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.sigma_post.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        const double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        s.beta[t] = beta_min + (beta_max - beta_min) * frac;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
        s.sigma[t] = std::sqrt((1.0 - s.alpha_bar[t]) / s.alpha_bar[t]);
        s.sigma_post[t] =
            std::sqrt(s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]));
    }
    return s;
}

// Intermediate noise level for one reverse step, sigma_{t-1} <= sigma_hat <= sigma_t.
// churn = 1 keeps the step fully deterministic (re-injection term vanishes),
// churn = 0 re-injects the whole step's noise budget sqrt(sigma_t^2 - sigma_{t-1}^2).
inline double sigma_hat(const NoiseSchedule& s, int t, double churn) {
    s.check_t(t, 1);
    if (churn < 0.0 || churn > 1.0) {
        throw ParamError("churn must lie in [0, 1]");
    }
    return s.sigma[t - 1] + churn * (s.sigma[t] - s.sigma[t - 1]);
}

}  // namespace sepdiff
