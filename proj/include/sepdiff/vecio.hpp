#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"

namespace sepdiff {

// Small binary vector file used to declare prior means/variances out of line:
// 16-byte header (magic "SDPR", version u32, length u64), then `length`
// little-endian 64-bit floats.

inline constexpr std::uint32_t kVectorFileVersion = 1;

inline void write_vector_file(const std::string& path, const std::vector<double>& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const char magic[4] = {'S', 'D', 'P', 'R'};
    out.write(magic, 4);
    const std::uint32_t version = kVectorFileVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t length = v.size();
    out.write(reinterpret_cast<const char*>(&length), 8);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!out) throw IoError("short write to " + path);
}

inline std::vector<double> read_vector_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SDPR", 4) != 0) {
        throw IoError(path + " is not a vector file (bad magic)");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != kVectorFileVersion) {
        throw IoError(path + ": unsupported vector file version");
    }
    std::uint64_t length = 0;
    in.read(reinterpret_cast<char*>(&length), 8);
    if (!in) throw IoError(path + ": truncated header");
    std::vector<double> v(length);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(length * sizeof(double)));
    if (!in) throw IoError(path + ": truncated payload");
    return v;
}

}  // namespace sepdiff
