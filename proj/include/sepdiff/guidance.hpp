#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/fft.hpp"
#include "sepdiff/signals.hpp"

namespace sepdiff {

// Frame-level embedding matrix: F frames x B dimensions, rows L2-normalized.
struct EmbeddingMatrix {
    std::size_t frames = 0;
    std::size_t dims = 0;
    std::vector<double> data;  // row-major

    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t f, std::size_t b) : frames(f), dims(b), data(f * b, 0.0) {}

    double* row(std::size_t f) { return data.data() + f * dims; }
    const double* row(std::size_t f) const { return data.data() + f * dims; }
};

// Differentiable map from a sample vector to frame-level embeddings, with an
// analytic gradient pullback.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual EmbeddingMatrix embed(std::span<const double> x) const = 0;

    // Pullback of a cotangent on the embedding matrix to the input signal.
    virtual std::vector<double> embed_vjp(std::span<const double> x,
                                          const EmbeddingMatrix& upstream) const = 0;

    virtual std::size_t min_length() const = 0;
};

namespace detail {

// Shared framing + triangular filterbank machinery for the band embedders.
struct BandFrames {
    std::size_t frame_len, hop, bands;
    std::vector<double> window;
    std::vector<double> filter;  // bands x n_bins

    BandFrames(std::size_t frame_len_in, std::size_t hop_in, std::size_t bands_in)
        : frame_len(frame_len_in), hop(hop_in), bands(bands_in),
          window(hann_window(frame_len_in)) {
        if (!is_power_of_two(frame_len)) {
            throw ParamError("embedder frame length must be a power of two");
        }
        if (hop == 0 || hop > frame_len) throw ParamError("embedder hop must be in [1, frame]");
        if (bands < 1 || bands > frame_len / 2) {
            throw ParamError("bands must lie in [1, frame/2]");
        }
        const std::size_t nb = n_bins();
        filter.assign(bands * nb, 0.0);
        // bands+2 anchors linearly spaced over [0, nb-1]; band b is the
        // triangle peaking at anchor b+1.
        auto anchor = [&](std::size_t p) {
            return static_cast<double>(p) * static_cast<double>(nb - 1) /
                   static_cast<double>(bands + 1);
        };
        for (std::size_t b = 0; b < bands; ++b) {
            const double lo = anchor(b), mid = anchor(b + 1), hi = anchor(b + 2);
            for (std::size_t j = 0; j < nb; ++j) {
                const double fj = static_cast<double>(j);
                double w = 0.0;
                if (fj >= lo && fj <= mid && mid > lo) {
                    w = (fj - lo) / (mid - lo);
                } else if (fj > mid && fj <= hi && hi > mid) {
                    w = (hi - fj) / (hi - mid);
                }
                filter[b * nb + j] = w;
            }
        }
    }

    std::size_t n_bins() const { return frame_len / 2 + 1; }

    std::size_t frame_count(std::size_t len) const {
        if (len < frame_len) {
            throw ParamError("signal shorter than one embedder frame (" +
                             std::to_string(len) + " < " + std::to_string(frame_len) + ")");
        }
        return 1 + (len - frame_len) / hop;
    }

    // windowed frame magnitudes and spectrum
    void frame_spectrum(std::span<const double> x, std::size_t f,
                        std::vector<double>& buf,
                        std::vector<std::complex<double>>& spec) const {
        buf.resize(frame_len);
        for (std::size_t i = 0; i < frame_len; ++i) buf[i] = x[f * hop + i] * window[i];
        spec = rfft(buf);
    }

    void band_energies(const std::vector<std::complex<double>>& spec,
                       std::vector<double>& mag, std::vector<double>& e) const {
        const std::size_t nb = n_bins();
        mag.resize(nb);
        for (std::size_t j = 0; j < nb; ++j) mag[j] = std::abs(spec[j]);
        e.assign(bands, 0.0);
        for (std::size_t b = 0; b < bands; ++b) {
            for (std::size_t j = 0; j < nb; ++j) e[b] += filter[b * nb + j] * mag[j];
        }
    }

    // pulls a cotangent on the band energies back to the input samples
    void pull_to_signal(std::span<const double> /*x*/, std::size_t f,
                        const std::vector<double>& de, const std::vector<double>& mag,
                        const std::vector<std::complex<double>>& spec,
                        std::vector<double>& grad) const {
        const std::size_t nb = n_bins();
        std::vector<double> dm(nb, 0.0);
        for (std::size_t b = 0; b < bands; ++b) {
            for (std::size_t j = 0; j < nb; ++j) dm[j] += de[b] * filter[b * nb + j];
        }
        std::vector<std::complex<double>> cot(nb);
        for (std::size_t j = 0; j < nb; ++j) {
            cot[j] = mag[j] > 0.0 ? dm[j] / mag[j] * spec[j] : std::complex<double>(0.0, 0.0);
        }
        const auto frame_grad = rfft_adjoint(cot, frame_len);
        for (std::size_t i = 0; i < frame_len; ++i) {
            grad[f * hop + i] += frame_grad[i] * window[i];
        }
    }
};

}  // namespace detail

// Hann-windowed magnitude spectra pooled into triangular frequency bands,
// compressed with log(1 + .) and row-normalized. A deliberately small,
// fully differentiable stand-in for a trained speaker encoder: distinct
// harmonic sources land in distinct bands.
class BandEnergyEmbedder final : public Embedder {
public:
    BandEnergyEmbedder(std::size_t frame_len, std::size_t hop, std::size_t bands)
        : bf_(frame_len, hop, bands) {}

    std::size_t min_length() const override { return bf_.frame_len; }
    std::size_t frame_len() const { return bf_.frame_len; }
    std::size_t hop() const { return bf_.hop; }
    std::size_t bands() const { return bf_.bands; }

    EmbeddingMatrix embed(std::span<const double> x) const override {
        const std::size_t F = bf_.frame_count(x.size());
        const std::size_t B = bf_.bands;
        EmbeddingMatrix out(F, B);
        std::vector<double> buf, mag, e;
        std::vector<std::complex<double>> spec;
        for (std::size_t f = 0; f < F; ++f) {
            bf_.frame_spectrum(x, f, buf, spec);
            bf_.band_energies(spec, mag, e);
            double norm2 = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const double z = std::log1p(e[b]);
                out.row(f)[b] = z;
                norm2 += z * z;
            }
            const double norm = std::sqrt(norm2);
            if (norm > kZeroNorm) {
                for (std::size_t b = 0; b < B; ++b) out.row(f)[b] /= norm;
            } else {
                // Silent frame: fall back to the uniform unit vector.
                const double u = 1.0 / std::sqrt(static_cast<double>(B));
                for (std::size_t b = 0; b < B; ++b) out.row(f)[b] = u;
            }
        }
        return out;
    }

    std::vector<double> embed_vjp(std::span<const double> x,
                                  const EmbeddingMatrix& upstream) const override {
        const std::size_t F = bf_.frame_count(x.size());
        const std::size_t B = bf_.bands;
        if (upstream.frames != F || upstream.dims != B) {
            throw ShapeError("embed_vjp cotangent shape mismatch");
        }
        std::vector<double> grad(x.size(), 0.0);
        std::vector<double> buf, mag, e, z(B), de(B);
        std::vector<std::complex<double>> spec;
        for (std::size_t f = 0; f < F; ++f) {
            bf_.frame_spectrum(x, f, buf, spec);
            bf_.band_energies(spec, mag, e);
            double norm2 = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                z[b] = std::log1p(e[b]);
                norm2 += z[b] * z[b];
            }
            const double norm = std::sqrt(norm2);
            if (norm <= kZeroNorm) continue;  // uniform fallback row carries no gradient
            // through the row normalization r = z / |z|
            const double* u = upstream.row(f);
            double udotr = 0.0;
            for (std::size_t b = 0; b < B; ++b) udotr += u[b] * z[b] / norm;
            for (std::size_t b = 0; b < B; ++b) {
                const double dz = (u[b] - udotr * z[b] / norm) / norm;
                de[b] = dz / (1.0 + e[b]);
            }
            bf_.pull_to_signal(x, f, de, mag, spec, grad);
        }
        return grad;
    }

private:
    static constexpr double kZeroNorm = 1e-300;
    detail::BandFrames bf_;
};

// Noise-robust variant: per frame the mean log band energy is subtracted
// before normalization, so the flat spectral floor that reverse-diffusion
// noise adds to every band cancels and the embedding tracks the spectral
// CONTRAST of the underlying source. A constant component is appended before
// normalization, keeping rows well-defined (and unit norm) even on
// contrast-free frames. This plays the role of the denoiser stage a trained
// speaker encoder would carry in front.
class SpectralContrastEmbedder final : public Embedder {
public:
    // sharpness = 1 keeps raw contrasts; odd sharpness > 1 raises them to that
    // power, which suppresses blended (low-contrast) profiles and makes the
    // embedding snap toward whichever spectral prototype dominates a frame --
    // the discriminative behavior a trained speaker encoder exhibits.
    SpectralContrastEmbedder(std::size_t frame_len, std::size_t hop, std::size_t bands,
                             int sharpness = 1)
        : bf_(frame_len, hop, bands), sharpness_(sharpness) {
        if (sharpness_ < 1 || sharpness_ % 2 == 0) {
            throw ParamError("contrast sharpness must be a positive odd integer");
        }
    }

    std::size_t min_length() const override { return bf_.frame_len; }
    // embedding dimension is bands + 1 (the appended constant component)
    std::size_t dims() const { return bf_.bands + 1; }

    EmbeddingMatrix embed(std::span<const double> x) const override {
        const std::size_t F = bf_.frame_count(x.size());
        const std::size_t B = bf_.bands;
        EmbeddingMatrix out(F, B + 1);
        std::vector<double> buf, mag, e;
        std::vector<std::complex<double>> spec;
        for (std::size_t f = 0; f < F; ++f) {
            bf_.frame_spectrum(x, f, buf, spec);
            bf_.band_energies(spec, mag, e);
            double mean = 0.0;
            for (std::size_t b = 0; b < B; ++b) mean += std::log1p(e[b]);
            mean /= static_cast<double>(B);
            double norm2 = kAnchor * kAnchor;
            for (std::size_t b = 0; b < B; ++b) {
                const double c = sharpen(std::log1p(e[b]) - mean);
                out.row(f)[b] = c;
                norm2 += c * c;
            }
            out.row(f)[B] = kAnchor;
            const double norm = std::sqrt(norm2);
            for (std::size_t b = 0; b <= B; ++b) out.row(f)[b] /= norm;
        }
        return out;
    }

    std::vector<double> embed_vjp(std::span<const double> x,
                                  const EmbeddingMatrix& upstream) const override {
        const std::size_t F = bf_.frame_count(x.size());
        const std::size_t B = bf_.bands;
        if (upstream.frames != F || upstream.dims != B + 1) {
            throw ShapeError("embed_vjp cotangent shape mismatch");
        }
        std::vector<double> grad(x.size(), 0.0);
        std::vector<double> buf, mag, e, v(B + 1), dc(B), de(B);
        std::vector<std::complex<double>> spec;
        for (std::size_t f = 0; f < F; ++f) {
            bf_.frame_spectrum(x, f, buf, spec);
            bf_.band_energies(spec, mag, e);
            double mean = 0.0;
            for (std::size_t b = 0; b < B; ++b) mean += std::log1p(e[b]);
            mean /= static_cast<double>(B);
            std::vector<double> c_raw(B);
            double norm2 = kAnchor * kAnchor;
            for (std::size_t b = 0; b < B; ++b) {
                c_raw[b] = std::log1p(e[b]) - mean;
                v[b] = sharpen(c_raw[b]);
                norm2 += v[b] * v[b];
            }
            v[B] = kAnchor;
            const double norm = std::sqrt(norm2);
            // through r = v / |v|
            const double* u = upstream.row(f);
            double udotr = 0.0;
            for (std::size_t b = 0; b <= B; ++b) udotr += u[b] * v[b] / norm;
            double dmean_acc = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const double ds = (u[b] - udotr * v[b] / norm) / norm;
                dc[b] = ds * sharpen_slope(c_raw[b]);
                dmean_acc += dc[b];
            }
            // through the mean subtraction and log1p
            for (std::size_t b = 0; b < B; ++b) {
                const double dz = dc[b] - dmean_acc / static_cast<double>(B);
                de[b] = dz / (1.0 + e[b]);
            }
            bf_.pull_to_signal(x, f, de, mag, spec, grad);
        }
        return grad;
    }

private:
    static constexpr double kAnchor = 1.0;
    detail::BandFrames bf_;
    int sharpness_;

    double sharpen(double c) const {
        double out = c;
        for (int p = 1; p < sharpness_; ++p) out *= c;
        return out;
    }
    double sharpen_slope(double c) const {
        if (sharpness_ == 1) return 1.0;
        double out = static_cast<double>(sharpness_);
        for (int p = 1; p < sharpness_; ++p) out *= c;
        return out;
    }
};

namespace detail {

inline double vdot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double vnorm(const double* a, std::size_t n) { return std::sqrt(vdot(a, a, n)); }

}  // namespace detail

// Speaker loss over K embedding matrices: frame-vs-track-mean cosine
// consistency within each track plus pairwise cosine similarity between
// track-mean embeddings (ordered pairs).
inline double speaker_loss(const std::vector<EmbeddingMatrix>& embeddings) {
    if (embeddings.empty()) throw ParamError("speaker_loss needs at least one track");
    const std::size_t F = embeddings.front().frames;
    const std::size_t B = embeddings.front().dims;
    if (F == 0) throw ParamError("speaker_loss needs at least one frame");
    for (const auto& e : embeddings) {
        if (e.frames != F || e.dims != B) throw ShapeError("embedding shape mismatch");
    }
    const std::size_t K = embeddings.size();
    std::vector<std::vector<double>> means(K, std::vector<double>(B, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t f = 0; f < F; ++f) {
            const double* r = embeddings[k].row(f);
            for (std::size_t b = 0; b < B; ++b) means[k][b] += r[b];
        }
        for (double& v : means[k]) v /= static_cast<double>(F);
    }
    double loss = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double nm = detail::vnorm(means[k].data(), B);
        for (std::size_t f = 0; f < F; ++f) {
            const double* r = embeddings[k].row(f);
            const double nr = detail::vnorm(r, B);
            const double denom = nr * nm;
            const double c = denom > 0.0 ? detail::vdot(r, means[k].data(), B) / denom : 0.0;
            loss += 1.0 - c;
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            const double nk = detail::vnorm(means[k].data(), B);
            const double nj = detail::vnorm(means[j].data(), B);
            const double denom = nk * nj;
            loss += denom > 0.0 ? detail::vdot(means[k].data(), means[j].data(), B) / denom : 0.0;
        }
    }
    return loss;
}

// Gradient of speaker_loss with respect to every embedding row. The track
// means participate in the chain rule (no stop-gradient).
inline std::vector<EmbeddingMatrix> speaker_loss_grad(
    const std::vector<EmbeddingMatrix>& embeddings) {
    const std::size_t K = embeddings.size();
    const std::size_t F = embeddings.front().frames;
    const std::size_t B = embeddings.front().dims;
    std::vector<std::vector<double>> means(K, std::vector<double>(B, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t f = 0; f < F; ++f) {
            const double* r = embeddings[k].row(f);
            for (std::size_t b = 0; b < B; ++b) means[k][b] += r[b];
        }
        for (double& v : means[k]) v /= static_cast<double>(F);
    }
    std::vector<EmbeddingMatrix> grads(K);
    std::vector<std::vector<double>> mean_grads(K, std::vector<double>(B, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        grads[k] = EmbeddingMatrix(F, B);
        const double* m = means[k].data();
        const double nm = detail::vnorm(m, B);
        if (nm == 0.0) continue;
        for (std::size_t f = 0; f < F; ++f) {
            const double* r = embeddings[k].row(f);
            const double nr = detail::vnorm(r, B);
            if (nr == 0.0) continue;
            const double c = detail::vdot(r, m, B) / (nr * nm);
            // inner term contributes -(d cos / d row) and -(d cos / d mean)
            for (std::size_t b = 0; b < B; ++b) {
                grads[k].row(f)[b] -= m[b] / (nr * nm) - c * r[b] / (nr * nr);
                mean_grads[k][b] -= r[b] / (nr * nm) - c * m[b] / (nm * nm);
            }
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        const double* mk = means[k].data();
        const double nk = detail::vnorm(mk, B);
        if (nk == 0.0) continue;
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            const double* mj = means[j].data();
            const double nj = detail::vnorm(mj, B);
            if (nj == 0.0) continue;
            const double c = detail::vdot(mk, mj, B) / (nk * nj);
            // ordered pairs: (k, j) and (j, k) both land here with k as "u"
            for (std::size_t b = 0; b < B; ++b) {
                mean_grads[k][b] += 2.0 * (mj[b] / (nk * nj) - c * mk[b] / (nk * nk));
            }
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t b = 0; b < B; ++b) {
                grads[k].row(f)[b] += mean_grads[k][b] / static_cast<double>(F);
            }
        }
    }
    return grads;
}

struct TrackGradients {
    std::vector<std::vector<double>> per_track;
    double raw_norm = 0.0;  // global L2 norm before normalization; 0 => skipped
};

// Full-chain gradient of the speaker loss with respect to the track samples,
// normalized to unit global L2 norm over the concatenation of all tracks.
// Returns zero vectors (raw_norm = 0) when the gradient is numerically null.
inline TrackGradients speaker_guidance_gradient(const std::vector<std::vector<double>>& tracks,
                                                const Embedder& embedder) {
    if (tracks.empty()) throw ParamError("guidance needs at least one track");
    std::vector<EmbeddingMatrix> embeddings(tracks.size());
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        embeddings[k] = embedder.embed(tracks[k]);
    }
    const auto row_grads = speaker_loss_grad(embeddings);
    TrackGradients out;
    out.per_track.resize(tracks.size());
    double norm2 = 0.0;
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        out.per_track[k] = embedder.embed_vjp(tracks[k], row_grads[k]);
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

// Score update of the guidance block: score <- score - r * g per track.
inline std::vector<std::vector<double>> apply_guidance(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::vector<double>>& unit_grads, double r) {
    if (r < 0.0) throw ParamError("guidance radius must be nonnegative");
    if (scores.size() != unit_grads.size()) throw ShapeError("track count mismatch");
    auto out = scores;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (unit_grads[k].size() != out[k].size()) throw ShapeError("track length mismatch");
        for (std::size_t i = 0; i < out[k].size(); ++i) {
            out[k][i] -= r * unit_grads[k][i];
        }
    }
    return out;
}

}  // namespace sepdiff
