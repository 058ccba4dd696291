#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "sepdiff/errors.hpp"

namespace sepdiff {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. inverse=true applies the conjugate
// transform and the 1/n factor, so fft(fft(x), inverse) == x.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) {
        throw ParamError("fft length must be a power of two");
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Forward transform of a real frame; returns the n/2 + 1 one-sided bins.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& frame) {
    std::vector<std::complex<double>> a(frame.begin(), frame.end());
    fft_inplace(a);
    a.resize(frame.size() / 2 + 1);
    return a;
}

// Adjoint of rfft: maps a cotangent on the one-sided bins back to the frame.
// The transform matrix W has W^H = conj(W), so the adjoint is the conjugated
// forward transform applied to the zero-padded conjugate cotangent.
inline std::vector<double> rfft_adjoint(const std::vector<std::complex<double>>& cotangent,
                                        std::size_t frame_len) {
    std::vector<std::complex<double>> a(frame_len, {0.0, 0.0});
    for (std::size_t j = 0; j < cotangent.size() && j < frame_len; ++j) {
        a[j] = std::conj(cotangent[j]);
    }
    fft_inplace(a);
    std::vector<double> out(frame_len);
    for (std::size_t i = 0; i < frame_len; ++i) out[i] = a[i].real();
    return out;
}

}  // namespace sepdiff
