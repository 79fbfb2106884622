#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ifedrec {

// Error taxonomy; message text carries the specifics (shapes, ids, indices).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};
struct LookupError : std::runtime_error {
    explicit LookupError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

using Rng = std::mt19937_64;

// FNV-1a, used for config hashes and derived sweep seeds. Stable across
// platforms, unlike std::hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t basis = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = basis;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t basis = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), basis);
}

// Derives an independent RNG stream from a master seed and a role tag, so
// server sampling, per-client updates and data generation never share state.
inline Rng make_stream(std::uint64_t seed, const std::string& role, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(role);
    h = fnv1a64(&seed, sizeof(seed), h);
    h = fnv1a64(&index, sizeof(index), h);
    return Rng(h);
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

}  // namespace ifedrec
