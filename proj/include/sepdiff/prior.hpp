#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/schedule.hpp"

namespace sepdiff {

// Score model for one source prior: score(x_t, t) = grad_x log p_t(x_t) of the
// diffused marginal. Implementations must be pure functions of (x_t, t).
// measurement_vjp is the vector-Jacobian product of the Tweedie denoiser
// x_hat_0(x_t); models that cannot provide it report has_measurement_vjp()
// false and solvers fall back to the detached gradient approximation.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual std::size_t dim() const = 0;

    virtual void score(std::span<const double> x_t, int t, std::span<double> out) const = 0;

    virtual bool has_measurement_vjp() const { return false; }

    virtual void measurement_vjp(std::span<const double> /*x_t*/, int /*t*/,
                                 std::span<const double> /*v*/,
                                 std::span<double> /*out*/) const {
        throw ConfigError("score model does not provide measurement_vjp");
    }

    std::vector<double> score(std::span<const double> x_t, int t) const {
        std::vector<double> out(x_t.size());
        score(x_t, t, out);
        return out;
    }
};

// Diagonal Gaussian prior x_0 ~ N(mean, diag(var)).
struct GaussianPrior {
    std::vector<double> mean;
    std::vector<double> var;

    GaussianPrior(std::vector<double> mean_in, std::vector<double> var_in)
        : mean(std::move(mean_in)), var(std::move(var_in)) {
        if (mean.size() != var.size()) {
            throw ShapeError("gaussian prior mean/var length mismatch");
        }
        for (double v : var) {
            if (!(v > 0.0)) throw ParamError("gaussian prior variance must be positive");
        }
    }

    static GaussianPrior isotropic(std::size_t dim, double mean_value, double var_value) {
        return GaussianPrior(std::vector<double>(dim, mean_value),
                             std::vector<double>(dim, var_value));
    }
};

// One diagonal component of a Gaussian mixture.
struct GmmComponent {
    double weight;
    std::vector<double> mean;
    std::vector<double> var;
};

struct GmmPrior {
    std::vector<GmmComponent> components;

    explicit GmmPrior(std::vector<GmmComponent> comps) : components(std::move(comps)) {
        if (components.empty()) throw ParamError("mixture needs at least one component");
        const std::size_t d = components.front().mean.size();
        double wsum = 0.0;
        for (const auto& c : components) {
            if (c.mean.size() != d || c.var.size() != d) {
                throw ShapeError("mixture component dimension mismatch");
            }
            if (!(c.weight > 0.0)) throw ParamError("mixture weights must be positive");
            for (double v : c.var) {
                if (!(v > 0.0)) throw ParamError("mixture variance must be positive");
            }
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-12) {
            throw ParamError("mixture weights must sum to 1");
        }
    }

    std::size_t dim() const { return components.front().mean.size(); }
};

namespace detail {

inline void check_xt(std::size_t prior_dim, const NoiseSchedule& sched,
                     std::span<const double> x_t, int t) {
    sched.check_t(t, 0);
    if (x_t.size() != prior_dim) {
        throw ShapeError("state length " + std::to_string(x_t.size()) +
                         " != prior dimension " + std::to_string(prior_dim));
    }
}

}  // namespace detail

// Exact score of the diffused Gaussian marginal: at timestep t the marginal is
// N(sqrt(ab_t) mean, ab_t var + (1 - ab_t)) per dimension.
inline void gaussian_score(const GaussianPrior& prior, const NoiseSchedule& sched,
                           std::span<const double> x_t, int t, std::span<double> out) {
    detail::check_xt(prior.mean.size(), sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double marginal_var = ab * prior.var[i] + (1.0 - ab);
        out[i] = -(x_t[i] - sab * prior.mean[i]) / marginal_var;
    }
}

inline std::vector<double> gaussian_score(const GaussianPrior& prior,
                                          const NoiseSchedule& sched,
                                          std::span<const double> x_t, int t) {
    std::vector<double> out(x_t.size());
    gaussian_score(prior, sched, x_t, t, out);
    return out;
}

// Log density of the diffused Gaussian marginal (used by finite-difference checks).
inline double gaussian_log_density(const GaussianPrior& prior, const NoiseSchedule& sched,
                                   std::span<const double> x_t, int t) {
    detail::check_xt(prior.mean.size(), sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    double logp = 0.0;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double marginal_var = ab * prior.var[i] + (1.0 - ab);
        const double d = x_t[i] - sab * prior.mean[i];
        logp += -0.5 * (d * d / marginal_var + std::log(6.283185307179586 * marginal_var));
    }
    return logp;
}

// Per-component responsibilities of the diffused mixture at (x_t, t),
// log-sum-exp stabilized. Sums to 1 by construction.
inline std::vector<double> gmm_responsibilities(const GmmPrior& prior,
                                                const NoiseSchedule& sched,
                                                std::span<const double> x_t, int t) {
    detail::check_xt(prior.dim(), sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    const std::size_t C = prior.components.size();
    std::vector<double> logw(C);
    for (std::size_t c = 0; c < C; ++c) {
        const auto& comp = prior.components[c];
        double lp = std::log(comp.weight);
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double mv = ab * comp.var[i] + (1.0 - ab);
            const double d = x_t[i] - sab * comp.mean[i];
            lp += -0.5 * (d * d / mv + std::log(6.283185307179586 * mv));
        }
        logw[c] = lp;
    }
    const double m = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (double& lw : logw) {
        lw = std::exp(lw - m);
        z += lw;
    }
    for (double& lw : logw) lw /= z;
    return logw;
}

inline void gmm_score(const GmmPrior& prior, const NoiseSchedule& sched,
                      std::span<const double> x_t, int t, std::span<double> out) {
    const auto resp = gmm_responsibilities(prior, sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < prior.components.size(); ++c) {
        const auto& comp = prior.components[c];
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double mv = ab * comp.var[i] + (1.0 - ab);
            out[i] += resp[c] * (-(x_t[i] - sab * comp.mean[i]) / mv);
        }
    }
}

inline std::vector<double> gmm_score(const GmmPrior& prior, const NoiseSchedule& sched,
                                     std::span<const double> x_t, int t) {
    std::vector<double> out(x_t.size());
    gmm_score(prior, sched, x_t, t, out);
    return out;
}

inline double gmm_log_density(const GmmPrior& prior, const NoiseSchedule& sched,
                              std::span<const double> x_t, int t) {
    detail::check_xt(prior.dim(), sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(prior.components.size());
    for (std::size_t c = 0; c < prior.components.size(); ++c) {
        const auto& comp = prior.components[c];
        double lp = std::log(comp.weight);
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double mv = ab * comp.var[i] + (1.0 - ab);
            const double d = x_t[i] - sab * comp.mean[i];
            lp += -0.5 * (d * d / mv + std::log(6.283185307179586 * mv));
        }
        logp[c] = lp;
        m = std::max(m, lp);
    }
    double z = 0.0;
    for (double lp : logp) z += std::exp(lp - m);
    return m + std::log(z);
}

// vjp through the Tweedie map of a diagonal GMM:
// dx_hat_0/dx = (I + (1 - ab) H) / sqrt(ab) with H the Hessian of the diffused
// log density; H v = sum_c r_c (s_c (s_c . v) - v / mv_c) - s_bar (s_bar . v).
inline void gmm_measurement_vjp(const GmmPrior& prior, const NoiseSchedule& sched,
                                std::span<const double> x_t, int t, std::span<const double> v,
                                std::span<double> out) {
    detail::check_xt(prior.dim(), sched, x_t, t);
    if (v.size() != x_t.size()) throw ShapeError("vjp vector length mismatch");
    const auto resp = gmm_responsibilities(prior, sched, x_t, t);
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    const std::size_t D = x_t.size();
    std::vector<double> hv(D, 0.0);
    std::vector<double> s_bar(D, 0.0);
    std::vector<double> s_c(D);
    for (std::size_t c = 0; c < prior.components.size(); ++c) {
        const auto& comp = prior.components[c];
        double dot = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double mv = ab * comp.var[i] + (1.0 - ab);
            s_c[i] = -(x_t[i] - sab * comp.mean[i]) / mv;
            dot += s_c[i] * v[i];
        }
        for (std::size_t i = 0; i < D; ++i) {
            const double mv = ab * comp.var[i] + (1.0 - ab);
            hv[i] += resp[c] * (s_c[i] * dot - v[i] / mv);
            s_bar[i] += resp[c] * s_c[i];
        }
    }
    double dot_bar = 0.0;
    for (std::size_t i = 0; i < D; ++i) dot_bar += s_bar[i] * v[i];
    for (std::size_t i = 0; i < D; ++i) {
        hv[i] -= s_bar[i] * dot_bar;
        out[i] = (v[i] + (1.0 - ab) * hv[i]) / sab;
    }
}

// Tweedie estimate of the clean sample: x_hat_0 = (x_t + (1 - ab_t) score) / sqrt(ab_t).
// t = 0 is the identity (the state already is a clean sample).
inline std::vector<double> tweedie_denoise(const NoiseSchedule& sched,
                                           std::span<const double> x_t,
                                           std::span<const double> score, int t) {
    sched.check_t(t, 0);
    if (score.size() != x_t.size()) {
        throw ShapeError("score length != state length in tweedie_denoise");
    }
    std::vector<double> out(x_t.begin(), x_t.end());
    if (t == 0) return out;
    const double ab = sched.alpha_bar[t];
    const double sab = std::sqrt(ab);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (x_t[i] + (1.0 - ab) * score[i]) / sab;
    }
    return out;
}

// ScoreModel adapters binding a prior to a schedule.

class GaussianScoreModel final : public ScoreModel {
public:
    using ScoreModel::score;

    GaussianScoreModel(GaussianPrior prior, std::shared_ptr<const NoiseSchedule> sched)
        : prior_(std::move(prior)), sched_(std::move(sched)) {}

    std::size_t dim() const override { return prior_.mean.size(); }

    void score(std::span<const double> x_t, int t, std::span<double> out) const override {
        gaussian_score(prior_, *sched_, x_t, t, out);
    }

    bool has_measurement_vjp() const override { return true; }

    // The Tweedie map of a Gaussian prior is affine with diagonal Jacobian
    // ab var / (ab var + 1 - ab) / sqrt(ab); the vjp is an elementwise product.
    void measurement_vjp(std::span<const double> x_t, int t, std::span<const double> v,
                         std::span<double> out) const override {
        detail::check_xt(prior_.mean.size(), *sched_, x_t, t);
        if (v.size() != x_t.size()) throw ShapeError("vjp vector length mismatch");
        const double ab = sched_->alpha_bar[t];
        const double sab = std::sqrt(ab);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double j = ab * prior_.var[i] / (ab * prior_.var[i] + (1.0 - ab)) / sab;
            out[i] = j * v[i];
        }
    }

    const GaussianPrior& prior() const { return prior_; }

private:
    GaussianPrior prior_;
    std::shared_ptr<const NoiseSchedule> sched_;
};

// Independent Gaussian-mixture prior per fixed-length block of the signal:
// every block chooses its own mixture component. Models sources whose local
// content is one of a few prototypes while the choice may vary along time --
// the multimodal oracle for temporal identity consistency.
class BlockGmmScoreModel final : public ScoreModel {
public:
    using ScoreModel::score;

    // prototype_means: M full-length vectors; block b of component m has mean
    // prototype_means[m][block range] and the shared diagonal variance.
    BlockGmmScoreModel(std::vector<std::vector<double>> prototype_means,
                       std::vector<double> weights, double var, std::size_t block_len,
                       std::shared_ptr<const NoiseSchedule> sched)
        : dim_(prototype_means.empty() ? 0 : prototype_means.front().size()),
          block_len_(block_len), sched_(std::move(sched)) {
        if (prototype_means.empty()) throw ParamError("block mixture needs components");
        if (weights.size() != prototype_means.size()) {
            throw ShapeError("block mixture weights/means count mismatch");
        }
        if (block_len_ < 1 || dim_ == 0) throw ParamError("invalid block mixture geometry");
        if (!(var > 0.0)) throw ParamError("block mixture variance must be positive");
        for (const auto& m : prototype_means) {
            if (m.size() != dim_) throw ShapeError("prototype length mismatch");
        }
        for (std::size_t start = 0; start < dim_; start += block_len_) {
            const std::size_t len = std::min(block_len_, dim_ - start);
            std::vector<GmmComponent> comps;
            for (std::size_t m = 0; m < prototype_means.size(); ++m) {
                comps.push_back(GmmComponent{
                    weights[m],
                    std::vector<double>(prototype_means[m].begin() +
                                            static_cast<std::ptrdiff_t>(start),
                                        prototype_means[m].begin() +
                                            static_cast<std::ptrdiff_t>(start + len)),
                    std::vector<double>(len, var)});
            }
            blocks_.emplace_back(GmmPrior(std::move(comps)));
        }
    }

    std::size_t dim() const override { return dim_; }
    std::size_t block_count() const { return blocks_.size(); }

    void score(std::span<const double> x_t, int t, std::span<double> out) const override {
        if (x_t.size() != dim_) throw ShapeError("block mixture state length mismatch");
        std::size_t start = 0;
        for (const auto& block : blocks_) {
            const std::size_t len = block.dim();
            gmm_score(block, *sched_, x_t.subspan(start, len), t, out.subspan(start, len));
            start += len;
        }
    }

    bool has_measurement_vjp() const override { return true; }

    void measurement_vjp(std::span<const double> x_t, int t, std::span<const double> v,
                         std::span<double> out) const override {
        if (x_t.size() != dim_ || v.size() != dim_) {
            throw ShapeError("block mixture vjp length mismatch");
        }
        std::size_t start = 0;
        for (const auto& block : blocks_) {
            const std::size_t len = block.dim();
            gmm_measurement_vjp(block, *sched_, x_t.subspan(start, len), t,
                                v.subspan(start, len), out.subspan(start, len));
            start += len;
        }
    }

    // responsibilities of block `b` at (x_t, t)
    std::vector<double> block_responsibilities(std::size_t b, std::span<const double> x_t,
                                               int t) const {
        const std::size_t start = b * block_len_;
        return gmm_responsibilities(blocks_.at(b), *sched_,
                                    x_t.subspan(start, blocks_.at(b).dim()), t);
    }

private:
    std::size_t dim_;
    std::size_t block_len_;
    std::shared_ptr<const NoiseSchedule> sched_;
    std::vector<GmmPrior> blocks_;
};

class GmmScoreModel final : public ScoreModel {
public:
    using ScoreModel::score;

    GmmScoreModel(GmmPrior prior, std::shared_ptr<const NoiseSchedule> sched)
        : prior_(std::move(prior)), sched_(std::move(sched)) {}

    std::size_t dim() const override { return prior_.dim(); }

    void score(std::span<const double> x_t, int t, std::span<double> out) const override {
        gmm_score(prior_, *sched_, x_t, t, out);
    }

    bool has_measurement_vjp() const override { return true; }

    void measurement_vjp(std::span<const double> x_t, int t, std::span<const double> v,
                         std::span<double> out) const override {
        gmm_measurement_vjp(prior_, *sched_, x_t, t, v, out);
    }

    const GmmPrior& prior() const { return prior_; }

private:
    GmmPrior prior_;
    std::shared_ptr<const NoiseSchedule> sched_;
};

}  // namespace sepdiff
