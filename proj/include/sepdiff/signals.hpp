#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/fft.hpp"
#include "sepdiff/rng.hpp"

namespace sepdiff {

struct Waveform {
    std::vector<double> samples;
    int sample_rate = 16000;

    std::size_t size() const { return samples.size(); }
};

inline double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

inline double rms_db(const std::vector<double>& x) { return 20.0 * std::log10(rms(x)); }

// Sum of harmonics with per-harmonic random phase and a slow random amplitude
// envelope; amplitudes fall off as 1/h. Deterministic in (seed).
inline Waveform harmonic_source(double f0, int n_harmonics, double duration_s, int sample_rate,
                                std::uint64_t seed) {
    if (n_harmonics < 1) throw ParamError("need at least one harmonic");
    if (!(f0 > 0.0) || !(duration_s > 0.0) || sample_rate <= 0) {
        throw ParamError("harmonic_source needs positive f0, duration and sample rate");
    }
    if (f0 * n_harmonics >= sample_rate / 2.0) {
        throw ParamError("f0 * n_harmonics must stay below the Nyquist frequency");
    }
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.assign(n, 0.0);
    RandomStream rs(seed, "harmonic_source");
    const double two_pi = 6.283185307179586476925287;
    for (int h = 1; h <= n_harmonics; ++h) {
        const double phase = rs.uniform_in(static_cast<std::uint64_t>(h), 0.0, two_pi);
        const double amp = 1.0 / h;
        const double omega = two_pi * f0 * h / sample_rate;
        for (std::size_t i = 0; i < n; ++i) {
            w.samples[i] += amp * std::sin(omega * static_cast<double>(i) + phase);
        }
    }
    // Slow envelope: three low-frequency cosines, kept strictly positive.
    const double env_rates[3] = {0.7, 1.3, 2.1};
    std::vector<double> env(n, 1.0);
    for (int e = 0; e < 3; ++e) {
        const double ph = rs.uniform_in(1000 + static_cast<std::uint64_t>(e), 0.0, two_pi);
        const double rate = two_pi * env_rates[e] / sample_rate;
        for (std::size_t i = 0; i < n; ++i) {
            env[i] += 0.15 * std::cos(rate * static_cast<double>(i) + ph);
        }
    }
    for (std::size_t i = 0; i < n; ++i) w.samples[i] *= env[i];
    return w;
}

// Rescales so the output RMS in dBFS equals target_db.
inline Waveform scale_to_rms(const Waveform& x, double target_db) {
    const double r = rms(x.samples);
    if (!(r > 0.0)) throw ParamError("cannot RMS-scale an identically zero signal");
    const double gain = std::pow(10.0, target_db / 20.0) / r;
    Waveform out = x;
    for (double& v : out.samples) v *= gain;
    return out;
}

struct MixtureSpec {
    int K = 2;
    double rms_db_low = -25.0;
    double rms_db_high = -20.0;
    std::size_t offset_max = 0;  // random start offset in samples, [0, offset_max]
    double duration_s = 2.0;
    int sample_rate = 16000;
    std::uint64_t seed = 0;

    void validate() const {
        if (K < 1) throw ParamError("mixture needs K >= 1");
        if (rms_db_low > rms_db_high) throw ParamError("rms_db_low must be <= rms_db_high");
        if (!(duration_s > 0.0)) throw ParamError("duration must be positive");
    }
};

struct SourceParams {
    double f0 = 200.0;
    int n_harmonics = 4;
    // When set, the source amplitude alternates on/off in anti-phase with its
    // neighbour so that local dominance flips along time.
    bool alternating = false;
    double segment_s = 0.1;
    // Nonzero pins this source's phases/envelope; 0 derives them from the
    // mixture seed. Pinning lets a mixture reuse declared prototype waveforms.
    std::uint64_t seed = 0;
};

struct Mixture {
    Waveform y;
    std::vector<Waveform> sources;
};

// Builds K RMS-levelled, offset, zero-padded sources and their exact sum.
// Levels are drawn uniformly in [rms_db_low, rms_db_high] and measured over
// each source's nonzero support before padding.
inline Mixture make_mixture(const MixtureSpec& spec, const std::vector<SourceParams>& params) {
    spec.validate();
    if (params.size() != static_cast<std::size_t>(spec.K)) {
        throw ShapeError("make_mixture needs one SourceParams per source");
    }
    RandomStream rs(spec.seed, "make_mixture");
    std::vector<Waveform> raw(params.size());
    std::vector<std::size_t> offsets(params.size());
    std::size_t total = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::uint64_t src_seed = params[k].seed != 0
                                           ? params[k].seed
                                           : rs.value(step_counter(0, (int)k, 1));
        Waveform src = harmonic_source(params[k].f0, params[k].n_harmonics, spec.duration_s,
                                       spec.sample_rate, src_seed);
        if (params[k].alternating) {
            const std::size_t seg =
                std::max<std::size_t>(1, static_cast<std::size_t>(params[k].segment_s *
                                                                  spec.sample_rate));
            // Track k is loud on even segments when k is even, odd segments otherwise.
            for (std::size_t i = 0; i < src.samples.size(); ++i) {
                const bool even_seg = ((i / seg) % 2) == 0;
                const bool loud = even_seg == ((k % 2) == 0);
                src.samples[i] *= loud ? 1.0 : 0.15;
            }
        }
        const double db =
            rs.uniform_in(step_counter(1, (int)k, 0), spec.rms_db_low, spec.rms_db_high);
        raw[k] = scale_to_rms(src, db);
        offsets[k] = spec.offset_max == 0
                         ? 0
                         : static_cast<std::size_t>(rs.value(step_counter(2, (int)k, 0)) %
                                                    (spec.offset_max + 1));
        total = std::max(total, offsets[k] + raw[k].samples.size());
    }
    Mixture mix;
    mix.y.sample_rate = spec.sample_rate;
    mix.y.samples.assign(total, 0.0);
    mix.sources.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        Waveform padded;
        padded.sample_rate = spec.sample_rate;
        padded.samples.assign(total, 0.0);
        std::copy(raw[k].samples.begin(), raw[k].samples.end(),
                  padded.samples.begin() + static_cast<std::ptrdiff_t>(offsets[k]));
        for (std::size_t i = 0; i < total; ++i) mix.y.samples[i] += padded.samples[i];
        mix.sources[k] = std::move(padded);
    }
    return mix;
}

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(6.283185307179586 * static_cast<double>(i) /
                                     static_cast<double>(n)));
    }
    return w;
}

using Spectrogram = std::vector<std::vector<std::complex<double>>>;  // [frame][bin]

inline void check_cola(std::size_t frame, std::size_t hop) {
    if (!is_power_of_two(frame)) throw ParamError("stft frame length must be a power of two");
    if (hop != frame / 2 && hop != frame / 4) {
        throw ParamError("stft hop must be frame/2 or frame/4 for COLA reconstruction");
    }
}

inline Spectrogram stft(const Waveform& x, std::size_t frame, std::size_t hop) {
    check_cola(frame, hop);
    if (x.samples.size() < frame) throw ParamError("signal shorter than one stft frame");
    const auto win = hann_window(frame);
    const std::size_t n_frames = 1 + (x.samples.size() - frame) / hop;
    Spectrogram spec(n_frames);
    std::vector<double> buf(frame);
    for (std::size_t f = 0; f < n_frames; ++f) {
        for (std::size_t i = 0; i < frame; ++i) buf[i] = x.samples[f * hop + i] * win[i];
        spec[f] = rfft(buf);
    }
    return spec;
}

// Weighted overlap-add inverse with the analysis window; exact on the interior
// where the squared-window partitions sum to a constant.
inline Waveform istft(const Spectrogram& spec, std::size_t frame, std::size_t hop,
                      int sample_rate = 16000) {
    check_cola(frame, hop);
    if (spec.empty()) return Waveform{{}, sample_rate};
    const auto win = hann_window(frame);
    const std::size_t n = (spec.size() - 1) * hop + frame;
    std::vector<double> acc(n, 0.0), den(n, 0.0);
    std::vector<std::complex<double>> full(frame);
    for (std::size_t f = 0; f < spec.size(); ++f) {
        if (spec[f].size() != frame / 2 + 1) throw ShapeError("spectrogram bin count mismatch");
        for (std::size_t j = 0; j <= frame / 2; ++j) full[j] = spec[f][j];
        for (std::size_t j = frame / 2 + 1; j < frame; ++j) full[j] = std::conj(full[frame - j]);
        fft_inplace(full, true);
        for (std::size_t i = 0; i < frame; ++i) {
            acc[f * hop + i] += full[i].real() * win[i];
            den[f * hop + i] += win[i] * win[i];
        }
    }
    Waveform out;
    out.sample_rate = sample_rate;
    out.samples.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.samples[i] = den[i] > 1e-12 ? acc[i] / den[i] : 0.0;
    }
    return out;
}

}  // namespace sepdiff
