#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/signals.hpp"

namespace sepdiff {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    b.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    b.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Mono RIFF/WAVE writer, 16-bit PCM or 32-bit float. Samples outside [-1, 1]
// are an error rather than a silent clamp.
inline void write_wav(const std::string& path, const Waveform& w,
                      WavFormat format = WavFormat::pcm16) {
    for (double v : w.samples) {
        if (!(std::abs(v) <= 1.0)) {
            throw IoError("refusing to clip sample " + std::to_string(v) + " writing " + path);
        }
    }
    const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
    const std::uint16_t fmt_code = format == WavFormat::pcm16 ? 1 : 3;
    const std::uint32_t bytes_per_sample = bits / 8;
    const std::uint32_t data_size =
        static_cast<std::uint32_t>(w.samples.size() * bytes_per_sample);

    std::vector<std::uint8_t> buf;
    buf.reserve(44 + data_size);
    const char* riff = "RIFF";
    buf.insert(buf.end(), riff, riff + 4);
    detail::put_u32(buf, 36 + data_size);
    const char* wave = "WAVEfmt ";
    buf.insert(buf.end(), wave, wave + 8);
    detail::put_u32(buf, 16);
    detail::put_u16(buf, fmt_code);
    detail::put_u16(buf, 1);  // mono
    detail::put_u32(buf, static_cast<std::uint32_t>(w.sample_rate));
    detail::put_u32(buf, static_cast<std::uint32_t>(w.sample_rate) * bytes_per_sample);
    detail::put_u16(buf, static_cast<std::uint16_t>(bytes_per_sample));
    detail::put_u16(buf, bits);
    const char* data = "data";
    buf.insert(buf.end(), data, data + 4);
    detail::put_u32(buf, data_size);
    if (format == WavFormat::pcm16) {
        for (double v : w.samples) {
            const double scaled = v * 32767.0;
            const std::int16_t q =
                static_cast<std::int16_t>(std::lround(std::max(-32768.0, scaled)));
            detail::put_u16(buf, static_cast<std::uint16_t>(q));
        }
    } else {
        for (double v : w.samples) {
            const float f = static_cast<float>(v);
            std::uint32_t bitsle;
            std::memcpy(&bitsle, &f, 4);
            detail::put_u32(buf, bitsle);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

inline Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
        throw IoError(path + " is not a RIFF/WAVE file");
    }
    std::size_t pos = 12;
    std::uint16_t fmt_code = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool got_fmt = false;
    Waveform w;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t chunk_size = detail::get_u32(buf.data() + pos + 4);
        const std::uint8_t* body = buf.data() + pos + 8;
        if (pos + 8 + chunk_size > buf.size()) throw IoError(path + ": truncated chunk");
        if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw IoError(path + ": malformed fmt chunk");
            fmt_code = detail::get_u16(body);
            channels = detail::get_u16(body + 2);
            sample_rate = detail::get_u32(body + 4);
            bits = detail::get_u16(body + 14);
            got_fmt = true;
        } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
            if (!got_fmt) throw IoError(path + ": data chunk before fmt");
            if (channels != 1) throw IoError(path + ": only mono WAV is supported");
            if (fmt_code == 1 && bits == 16) {
                const std::size_t n = chunk_size / 2;
                w.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::int16_t q =
                        static_cast<std::int16_t>(detail::get_u16(body + 2 * i));
                    w.samples[i] = static_cast<double>(q) / 32767.0;
                }
            } else if (fmt_code == 3 && bits == 32) {
                const std::size_t n = chunk_size / 4;
                w.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::uint32_t raw = detail::get_u32(body + 4 * i);
                    float f;
                    std::memcpy(&f, &raw, 4);
                    w.samples[i] = static_cast<double>(f);
                }
            } else {
                throw IoError(path + ": unsupported sample format (need 16-bit PCM or "
                                     "32-bit float)");
            }
            w.sample_rate = static_cast<int>(sample_rate);
            return w;
        }
        pos += 8 + chunk_size + (chunk_size & 1);
    }
    throw IoError(path + ": no data chunk found");
}

}  // namespace sepdiff
