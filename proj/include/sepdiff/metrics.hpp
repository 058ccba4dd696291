#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"

namespace sepdiff {

// Ratios are capped here instead of returning infinities so aggregates stay
// finite and comparable.
inline constexpr double kMetricCapDb = 100.0;

namespace detail {

inline double energy(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

// Scale-invariant signal-to-distortion ratio in dB. The estimate is projected
// onto the reference (alpha = <est, ref> / ||ref||^2) before the ratio.
inline double si_sdr(std::span<const double> ref, std::span<const double> est) {
    if (ref.size() != est.size()) throw ShapeError("si_sdr length mismatch");
    const double ref_energy = detail::energy(ref);
    if (!(ref_energy > 0.0)) throw ParamError("si_sdr reference must be nonzero");
    const double alpha = detail::dot(est, ref) / ref_energy;
    double signal = 0.0, error = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double s = alpha * ref[i];
        const double e = est[i] - s;
        signal += s * s;
        error += e * e;
    }
    if (error < 1e-20 * signal || signal == 0.0) {
        return signal == 0.0 ? -kMetricCapDb : kMetricCapDb;
    }
    return std::min(kMetricCapDb, 10.0 * std::log10(signal / error));
}

// Plain signal-to-error ratio in dB (no allowed-distortion filtering, no
// scale invariance).
inline double sdr(std::span<const double> ref, std::span<const double> est) {
    if (ref.size() != est.size()) throw ShapeError("sdr length mismatch");
    const double signal = detail::energy(ref);
    if (!(signal > 0.0)) throw ParamError("sdr reference must be nonzero");
    double error = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double e = est[i] - ref[i];
        error += e * e;
    }
    if (error < 1e-20 * signal) return kMetricCapDb;
    return std::min(kMetricCapDb, 10.0 * std::log10(signal / error));
}

using MetricFn = double (*)(std::span<const double>, std::span<const double>);

struct PitResult {
    std::vector<std::size_t> perm;   // perm[i] = estimate index assigned to reference i
    std::vector<double> scores;      // metric per reference under that assignment
    double mean = 0.0;
};

// Exhaustive permutation-invariant assignment maximizing the mean metric.
inline PitResult pit_assign(const std::vector<std::vector<double>>& refs,
                            const std::vector<std::vector<double>>& ests, MetricFn metric) {
    const std::size_t K = refs.size();
    if (K == 0 || ests.size() != K) throw ShapeError("pit_assign needs equal nonzero counts");
    if (K > 8) throw ParamError("pit_assign brute force is limited to K <= 8");
    // Score matrix first: K! permutations then only sum cached entries.
    std::vector<double> table(K * K);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            table[i * K + j] = metric(refs[i], ests[j]);
        }
    }
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_sum = -std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < K; ++i) s += table[i * K + perm[i]];
        if (s > best_sum) {
            best_sum = s;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    PitResult out;
    out.perm = best;
    out.scores.resize(K);
    for (std::size_t i = 0; i < K; ++i) out.scores[i] = table[i * K + best[i]];
    out.mean = best_sum / static_cast<double>(K);
    return out;
}

// Fraction of frames whose locally best assignment contradicts the global PIT
// permutation (K = 2 only). Frames where either reference carries no energy
// are skipped.
inline double swap_rate(const std::vector<std::vector<double>>& refs,
                        const std::vector<std::vector<double>>& ests, std::size_t frame_len) {
    if (refs.size() != 2 || ests.size() != 2) throw ParamError("swap_rate requires K = 2");
    if (frame_len == 0) throw ParamError("swap_rate frame length must be positive");
    const std::size_t n = refs[0].size();
    for (const auto& v : refs) {
        if (v.size() != n) throw ShapeError("swap_rate reference length mismatch");
    }
    for (const auto& v : ests) {
        if (v.size() != n) throw ShapeError("swap_rate estimate length mismatch");
    }
    const auto global = pit_assign(refs, ests, &si_sdr);
    const bool global_swapped = global.perm[0] == 1;

    const std::size_t n_frames = n / frame_len;
    std::size_t counted = 0, swapped = 0;
    constexpr double kSilence = 1e-30;
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t off = f * frame_len;
        std::span<const double> r0(refs[0].data() + off, frame_len);
        std::span<const double> r1(refs[1].data() + off, frame_len);
        if (detail::energy(r0) < kSilence || detail::energy(r1) < kSilence) continue;
        std::span<const double> e0(ests[0].data() + off, frame_len);
        std::span<const double> e1(ests[1].data() + off, frame_len);
        const double identity = si_sdr(r0, e0) + si_sdr(r1, e1);
        const double crossed = si_sdr(r0, e1) + si_sdr(r1, e0);
        const bool frame_swapped = crossed > identity;
        ++counted;
        if (frame_swapped != global_swapped) ++swapped;
    }
    return counted == 0 ? 0.0 : static_cast<double>(swapped) / static_cast<double>(counted);
}

// One evaluated mixture under one solver variant.
struct MixtureEval {
    std::size_t mixture_id = 0;
    std::string solver;
    std::vector<double> si_sdr_db;  // per source, reference order
    std::vector<double> sdr_db;
    std::vector<std::size_t> perm;
    double swap = -1.0;  // -1 when not applicable (K != 2)
    bool failed = false;
    std::string error;
};

struct Aggregate {
    std::string solver;
    std::size_t n = 0;
    std::size_t failures = 0;
    double mean_si_sdr = 0.0, se_si_sdr = 0.0;
    double mean_sdr = 0.0, se_sdr = 0.0;
    double mean_swap = 0.0, se_swap = 0.0;
};

struct EvalReport {
    std::vector<MixtureEval> rows;
    std::vector<Aggregate> aggregates;
};

// Mean and standard error of the mean over per-mixture means.
inline void mean_se(const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    se = std::sqrt(var / static_cast<double>(xs.size()));
}

inline Aggregate aggregate_rows(const std::string& solver,
                                const std::vector<MixtureEval>& rows) {
    Aggregate agg;
    agg.solver = solver;
    std::vector<double> sis, sds, swaps;
    for (const auto& r : rows) {
        if (r.solver != solver) continue;
        ++agg.n;
        if (r.failed) {
            ++agg.failures;
            continue;
        }
        double s = 0.0;
        for (double v : r.si_sdr_db) s += v;
        sis.push_back(s / static_cast<double>(r.si_sdr_db.size()));
        s = 0.0;
        for (double v : r.sdr_db) s += v;
        sds.push_back(s / static_cast<double>(r.sdr_db.size()));
        if (r.swap >= 0.0) swaps.push_back(r.swap);
    }
    mean_se(sis, agg.mean_si_sdr, agg.se_si_sdr);
    mean_se(sds, agg.mean_sdr, agg.se_sdr);
    mean_se(swaps, agg.mean_swap, agg.se_swap);
    return agg;
}

}  // namespace sepdiff
